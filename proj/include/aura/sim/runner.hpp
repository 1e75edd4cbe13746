#pragma once

#include "aura/exec_control.hpp"
#include "aura/firewall.hpp"
#include "aura/judge.hpp"
#include "aura/sim/scenario.hpp"

namespace aura::sim {

enum class OutcomeKind : uint8_t { Success, Failure, Blocked };

struct RunReport {
  std::string scenario_id;
  std::string mode;
  OutcomeKind outcome = OutcomeKind::Failure;
  std::string blocked_stage;
  std::string detail;
  uint64_t steps_used = 0;
  uint64_t audit_first = 0;
  uint64_t audit_last = 0;
  bool expected_met = false;

  std::string render() const;
};

struct RunOptions {
  session::KernelMode mode = session::KernelMode::Enforced;
  uint64_t seed = 1;
  bool optimistic = false;
  int window = 1;
  std::string data_dir = AURA_DATA_DIR;
  approval::ApprovalProvider* approval_override = nullptr;
  std::optional<std::string> audit_store_path;
  std::string tamper_stage;  // non-empty: perturb this boot stage image
};

struct SuiteMetrics {
  int benign_total = 0;
  int benign_success = 0;
  int attack_total = 0;
  int attack_blocked = 0;
  uint64_t total_steps = 0;
  std::vector<RunReport> reports;

  double tsr() const { return benign_total ? double(benign_success) / benign_total : 0.0; }
  double asr() const {
    return attack_total ? double(attack_total - attack_blocked) / attack_total : 0.0;
  }
  double mean_steps() const {
    return reports.empty() ? 0.0 : double(total_steps) / double(reports.size());
  }
  bool all_expected_met() const;
  std::string render() const;
};

// One simulated device: trusted platform, registry, kernel, firewall, memory,
// execution control, mock apps, and the scripted agents of one scenario.
// Everything is seeded; a (scenario, mode, seed) triple replays bit-for-bit.
class Device {
 public:
  struct AgentRt {
    AgentDid did;
    ProcessIdentity proc;
    std::optional<TokenId> token;
    RefusalPolicy refusal;
    registry::AgentIdentityCard aic;
  };

  struct ExecutedCritical {
    std::string api;
    std::vector<std::pair<uint64_t, cognition::Tag>> params;  // cell id, tag at execution
  };

  struct GroundTruth {
    int effects_applied = 0;  // state-mutating app calls that went through
    std::vector<ExecutedCritical> executed_criticals;
    int envelopes_accepted = 0;
  };

  Device(Scenario scenario, RunOptions options);

  RunReport run();

  platform::Platform& platform() { return plat_; }
  session::Kernel& kernel() { return kernel_; }
  audit::AuditLog& log() { return log_; }
  cognition::MemoryStore& memory() { return memory_; }
  exec::ExecController& exec() { return exec_; }
  firewall::Firewall& fw() { return fw_; }
  const NetworkLog& network() const { return net_; }
  const std::map<std::string, MockApp>& apps() const { return apps_; }
  const std::map<std::string, AgentRt>& agents() const { return agents_; }
  const AgentRt& system_agent() const { return sa_; }
  const GroundTruth& ground_truth() const { return truth_; }
  const Scenario& scenario() const { return sc_; }

  // Terminates the agent's process and re-authenticates it under a fresh pid.
  Result<session::SessionToken> restart_agent(const std::string& name);

 private:
  void setup();
  void apply_moves(int step_index);
  void exec_step(const ScenarioStep& step);

  void step_user_input(const nlohmann::json& a);
  void step_invoke(const nlohmann::json& a);
  void step_observe(const nlohmann::json& a);
  void step_derive(const nlohmann::json& a);
  void step_screen(const nlohmann::json& a);
  void step_sanitize(const nlohmann::json& a);
  void step_act(const nlohmann::json& a);

  std::optional<uint64_t> resolve_param(const std::string& value);
  std::string cell_text(uint64_t cell);
  std::map<std::string, std::string> resolved_params(const cognition::PlannedAction& action);
  std::optional<session::SessionToken> fresh_token(AgentRt& rt);
  void submit_observation(AgentRt& rt, const session::SessionToken& tok, const std::string& api,
                          const std::string& payload, const std::string& save_as);
  std::string guard_target(const std::string& agent, const std::string& api,
                           const cognition::PlannedAction& action);
  RunReport inspect();
  bool eval_check(const ScenarioCheck& check) const;

  Scenario sc_;
  RunOptions opt_;
  uint64_t device_seed_;
  platform::Platform plat_;
  registry::Registry registry_;
  audit::AuditLog log_;
  judge::JudgeRouter judges_;
  session::Kernel kernel_;
  firewall::Firewall fw_;
  cognition::MemoryStore memory_;
  exec::ExecController exec_;
  NetworkLog net_;
  std::map<std::string, MockApp> apps_;
  std::map<std::string, CriticalNodeCategory> critical_;
  std::unique_ptr<approval::ScriptedApprovalProvider> scripted_;
  approval::ApprovalProvider* approval_ = nullptr;

  AgentRt sa_;
  std::map<std::string, AgentRt> agents_;

  std::map<std::string, uint64_t> bindings_;
  std::vector<firewall::ObservationEnvelope> accepted_envelopes_;
  std::vector<std::string> history_;
  cognition::Trajectory traj_;
  GroundTruth truth_;
  bool boot_ok_ = false;
  bool ran_ = false;
  uint64_t steps_used_ = 0;
  int next_pid_ = 100;
  int sanitize_seq_ = 0;
  int escalate_seq_ = 0;
};

Result<RunReport> run_scenario(const Scenario& scenario, const RunOptions& options);
SuiteMetrics run_suite(const std::vector<Scenario>& scenarios, const RunOptions& options);

// Deterministic per-scenario seed derivation (mixes the run seed with the id).
uint64_t scenario_seed(uint64_t run_seed, const std::string& scenario_id);

}  // namespace aura::sim
