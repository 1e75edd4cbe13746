#pragma once

#include "aura/approval.hpp"
#include "aura/registry.hpp"
#include "aura/sim/mock_app.hpp"

namespace aura::sim {

struct ScenarioCheck {
  enum class Op : uint8_t { Contains, NotContains, Equals, Exists, Empty };
  std::string target;  // app name, "network" (path = host), or "audit"
  std::string path;
  Op op = Op::Contains;
  std::string value;
};

struct RefusalPolicy {
  std::vector<std::string> refuse_terms;
  std::vector<std::string> escalate_terms;

  bool configured() const { return !refuse_terms.empty() || !escalate_terms.empty(); }
};

enum class GuardVerdict : uint8_t { Proceed, Refuse, Escalate };

// AA-side context-aware refusal: the agent inspects the content its effect
// would touch and hard-stops or escalates before the kernel applies it.
GuardVerdict aa_guard(const RefusalPolicy& policy, const std::string& target_content,
                      std::string* matched);

struct ScenarioAgent {
  std::string name;  // app + agent name; developer is "<name>-dev"
  registry::AppCategory category = registry::AppCategory::CALCULATOR;
  std::set<SemanticPermission> permissions;
  std::set<std::string> allowlist;
  bool forged = false;  // installed with a self-signed AIC
  RefusalPolicy refusal;
  nlohmann::json initial_state;
};

struct AdversaryMove {
  std::string kind;  // forged_envelope | fake_observation | blacklist_evasion_text |
                     // tainted_source_write | endorsement_target
  int at_step = 0;   // applied before the script step with this index
  nlohmann::json args;
};

struct ScenarioStep {
  std::string op;  // user_input | invoke | observe | derive | screen | sanitize | act
  nlohmann::json args;
};

struct Scenario {
  std::string id;
  bool attack = false;
  std::vector<ScenarioAgent> agents;
  std::vector<ScenarioStep> script;
  std::vector<AdversaryMove> moves;
  std::map<std::string, approval::Choice> approvals;
  std::string expected_stage;  // attack scenarios: identity|firewall|cognition|execution
  std::vector<ScenarioCheck> task_checks;
  std::vector<ScenarioCheck> attack_checks;
  int step_budget = 200;
};

Result<Scenario> parse_scenario(const nlohmann::json& doc);
Result<Scenario> load_scenario(const std::string& path);
Result<std::vector<Scenario>> load_scenario_dir(const std::string& dir);

}  // namespace aura::sim
