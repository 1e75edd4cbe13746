#pragma once

#include "aura/cognition.hpp"
#include "aura/judge.hpp"
#include "aura/session.hpp"

namespace aura::exec {

// Per-step permission demand, derived from the planned action (declared by
// the scenario; an LLM planner would derive it upstream).
struct PermissionRequest {
  std::set<SemanticPermission> p_req;
  std::string op_name;
};

enum class Outcome : uint8_t { DirectPass, UserConfirmationRequired, Blocked, SecurityAlert };

std::string_view outcome_name(Outcome o);

struct Decision {
  Outcome outcome = Outcome::Blocked;
  std::string reason;
  // true when the action may be applied (DirectPass, or confirmation granted)
  bool execute = false;
};

struct TrustToken {
  TokenId session{};
  CriticalNodeCategory op_category = CriticalNodeCategory::PRIVACY_ACCESS;
  uint64_t issued_after = 0;  // audit record id of the minting Direct Pass
  bool live = true;
};

struct ExecConfig {
  bool optimistic = false;
  int window = 1;  // max unpublished async verdicts per (session, category)
};

// "mode=strict|optimistic" and "window=N" lines.
Result<ExecConfig> parse_exec_config(const std::string& text);

// Critical-node registry file: "<CATEGORY> api [api...]" lines.
Result<std::map<std::string, CriticalNodeCategory>> load_critical_nodes(const std::string& path);

struct AuthResult {
  Decision decision;
  // Action with tainted params replaced by their declassified cells.
  cognition::PlannedAction effective;
};

// Execution-boundary enforcement: JIT least privilege, critical-node
// interception (taint -> egress -> alignment -> validator), optimistic
// verification with trust tokens, and full decision auditing. Every decision
// is written to the log before the caller may act on it.
class ExecController {
 public:
  ExecController(session::Kernel& kernel, cognition::MemoryStore& memory, audit::AuditLog& log,
                 judge::JudgeRouter& judges, ExecConfig config);

  void set_config(ExecConfig config);

  struct PrivilegeDecision {
    bool granted = false;
    std::string reason;
  };
  PrivilegeDecision check_privilege(const session::SessionToken& token,
                                    const PermissionRequest& req,
                                    approval::ApprovalProvider& approval);

  struct EgressDecision {
    bool proceed = false;
    std::string host;
  };
  // Exact, case-insensitive hostname match against the session's allowlist;
  // anything else is dropped with a user-visible security alert.
  EgressDecision egress_filter(const session::SessionToken& token, const std::string& host);

  // DirectPass or UserConfirmationRequired; an unavailable judge fails toward
  // the human.
  judge::Decision validate_action(const judge::VerificationContext& ctx, std::string* rationale);

  // Full interception pipeline for one critical action. Benign actions pass
  // straight through with a trace record.
  AuthResult authorize(const session::SessionToken& token, const cognition::PlannedAction& action,
                       const std::set<SemanticPermission>& p_req, cognition::Trajectory& traj,
                       approval::ApprovalProvider& approval);

  // Publishes every pending asynchronous verdict (end of run).
  void drain_async();

  judge::VerificationContext build_verification_context(const cognition::Trajectory& traj,
                                                        const cognition::PlannedAction& action,
                                                        CriticalNodeCategory category) const;

  std::optional<TrustToken> trust_token(const TokenId& session,
                                        CriticalNodeCategory category) const;

 private:
  struct PendingVerdict {
    TokenId session{};
    CriticalNodeCategory category = CriticalNodeCategory::PRIVACY_ACCESS;
    std::string api;
    judge::Decision verdict = judge::Decision::kDirectPass;
    std::string rationale;
  };

  using TrustKey = std::pair<TokenId, CriticalNodeCategory>;

  Decision finish(const session::SessionToken& token, const Digest& actor,
                  const cognition::PlannedAction& action, Outcome outcome,
                  const std::string& reason, bool execute, const std::string& mode);
  void publish_pending_locked(const TrustKey& key);
  void publish_one_locked(const PendingVerdict& pv);
  Digest actor_of(const session::SessionToken& token) const;
  std::string params_digest(const cognition::PlannedAction& action) const;

  session::Kernel& kernel_;
  cognition::MemoryStore& memory_;
  audit::AuditLog& log_;
  judge::JudgeRouter& judges_;
  mutable std::mutex mu_;
  ExecConfig config_;
  std::map<TokenId, std::set<SemanticPermission>> granted_;
  std::map<TrustKey, TrustToken> trust_;
  std::vector<PendingVerdict> pending_;
  std::map<std::string, int> confirm_seq_;
};

}  // namespace aura::exec
