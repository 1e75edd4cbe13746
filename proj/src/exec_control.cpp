#include "aura/exec_control.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace aura::exec {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::DirectPass: return "direct_pass";
    case Outcome::UserConfirmationRequired: return "user_confirmation";
    case Outcome::Blocked: return "blocked";
    case Outcome::SecurityAlert: return "security_alert";
  }
  return "unknown";
}

Result<ExecConfig> parse_exec_config(const std::string& text) {
  ExecConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto h = line.find('#');
    if (h != std::string::npos) line.resize(h);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      size_t b = s.find_first_not_of(" \t\r");
      size_t e = s.find_last_not_of(" \t\r");
      s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
    };
    trim(key);
    trim(value);
    if (key == "mode") {
      if (value == "optimistic") cfg.optimistic = true;
      else if (value == "strict") cfg.optimistic = false;
      else return {Errc::kBadInput, "mode must be strict|optimistic"};
    } else if (key == "window") {
      try {
        cfg.window = std::stoi(value);
      } catch (const std::exception&) {
        return {Errc::kBadInput, "window must be an integer"};
      }
      if (cfg.window < 1) return {Errc::kBadInput, "window must be >= 1"};
    } else {
      return {Errc::kBadInput, "unknown config key " + key};
    }
  }
  return cfg;
}

Result<std::map<std::string, CriticalNodeCategory>> load_critical_nodes(const std::string& path) {
  std::ifstream in(path);
  if (!in) return {Errc::kBadInput, "cannot open " + path};
  std::map<std::string, CriticalNodeCategory> out;
  std::string line;
  while (std::getline(in, line)) {
    auto h = line.find('#');
    if (h != std::string::npos) line.resize(h);
    std::istringstream ls(line);
    std::string cat_name;
    if (!(ls >> cat_name)) continue;
    auto cat = category_from_name(cat_name);
    if (!cat) return {Errc::kBadInput, "unknown category " + cat_name};
    std::string api;
    while (ls >> api) out[api] = *cat;
  }
  return out;
}

ExecController::ExecController(session::Kernel& kernel, cognition::MemoryStore& memory,
                               audit::AuditLog& log, judge::JudgeRouter& judges, ExecConfig config)
    : kernel_(kernel), memory_(memory), log_(log), judges_(judges), config_(config) {}

void ExecController::set_config(ExecConfig config) {
  std::lock_guard lk(mu_);
  config_ = config;
}

Digest ExecController::actor_of(const session::SessionToken& token) const {
  auto aic = kernel_.aic_of(token.principal);
  return aic ? aic->fingerprint() : Digest{};
}

std::string ExecController::params_digest(const cognition::PlannedAction& action) const {
  std::string out;
  for (const auto& [name, cell] : action.params) {
    if (!out.empty()) out += ",";
    std::string tag = "?";
    if (auto c = memory_.read(cell); c.ok()) {
      tag = c.value().tag == cognition::Tag::TAINTED ? "tainted" : "verified";
    }
    out += name + ":" + std::to_string(cell) + ":" + tag;
  }
  return out.empty() ? "none" : out;
}

ExecController::PrivilegeDecision ExecController::check_privilege(
    const session::SessionToken& token, const PermissionRequest& req,
    approval::ApprovalProvider& approval) {
  Digest actor = actor_of(token);
  for (auto p : req.p_req) {
    if (!token.s_max.permissions.count(p)) {
      (void)log_.append(token.token_id, actor, audit::Event::ALERT, audit::Severity::CRITICAL,
                        "block stage=execution reason=privilege-policy api=" + req.op_name +
                            " perm=" + std::string(permission_name(p)));
      return {false, "policy: " + std::string(permission_name(p)) + " exceeds capability boundary"};
    }
  }
  std::set<SemanticPermission> to_ask;
  {
    std::lock_guard lk(mu_);
    auto& granted = granted_[token.token_id];
    for (auto p : req.p_req) {
      if (!granted.count(p)) to_ask.insert(p);
    }
  }
  for (auto p : to_ask) {
    approval::ApprovalRequest areq;
    areq.prompt_id = "permission-grant:" + std::string(permission_name(p)) + ":" +
                     token.principal.developer;
    areq.kind = approval::PromptKind::PermissionGrant;
    areq.summary = token.principal.developer + " requests " + std::string(permission_name(p)) +
                   " for " + req.op_name;
    auto choice = approval.decide(areq);
    if (!choice.ok() || choice.value() != approval::Choice::Authorize) {
      std::string why = choice.ok() ? "denied" : choice.error().to_string();
      (void)log_.append(token.token_id, actor, audit::Event::ALERT, audit::Severity::WARN,
                        "block stage=execution reason=privilege-consent api=" + req.op_name +
                            " perm=" + std::string(permission_name(p)) + " outcome=" + why);
      return {false, "consent " + why + " for " + std::string(permission_name(p))};
    }
    std::lock_guard lk(mu_);
    granted_[token.token_id].insert(p);
    (void)log_.append(token.token_id, actor, audit::Event::DECISION, audit::Severity::INFO,
                      "privilege-grant perm=" + std::string(permission_name(p)) +
                          " session-scoped api=" + req.op_name);
  }
  return {true, ""};
}

ExecController::EgressDecision ExecController::egress_filter(const session::SessionToken& token,
                                                             const std::string& host) {
  std::string h = lower(host);
  bool allowed = token.s_max.domain_allowlist.count(h) > 0;
  Digest actor = actor_of(token);
  if (allowed) {
    (void)log_.append(token.token_id, actor, audit::Event::DECISION, audit::Severity::INFO,
                      "stage=egress host=" + h + " result=proceed");
    return {true, h};
  }
  (void)log_.append(token.token_id, actor, audit::Event::ALERT, audit::Severity::CRITICAL,
                    "block stage=execution reason=egress host=" + h +
                        " alert=\"agent attempted to contact an unauthorized server\"");
  return {false, h};
}

judge::Decision ExecController::validate_action(const judge::VerificationContext& ctx,
                                                std::string* rationale) {
  judge::JudgeQuery q;
  q.role = judge::Role::ACTION_JUDGE;
  q.context = ctx;
  auto verdict = judges_.judge(q);
  if (!verdict.ok()) {
    if (rationale) *rationale = "validator unavailable: " + verdict.error().to_string();
    return judge::Decision::kUserConfirmationRequired;
  }
  if (rationale) *rationale = verdict.value().rationale;
  return verdict.value().decision;
}

judge::VerificationContext ExecController::build_verification_context(
    const cognition::Trajectory& traj, const cognition::PlannedAction& action,
    CriticalNodeCategory category) const {
  judge::VerificationContext ctx;
  ctx.i_user = traj.user_instruction;
  ctx.category = category;

  std::ostringstream hist;
  for (const auto& a : traj.actions) {
    hist << a.op_name << ": " << a.justification << "\n";
  }
  // Verified ancestry of the candidate's parameters; tainted content stays
  // out of the verification context.
  std::set<uint64_t> seen;
  std::vector<uint64_t> frontier;
  for (const auto& [_, cell] : action.params) frontier.push_back(cell);
  while (!frontier.empty()) {
    uint64_t id = frontier.back();
    frontier.pop_back();
    if (!seen.insert(id).second) continue;
    auto cell = memory_.read(id);
    if (!cell.ok()) continue;
    if (cell.value().tag == cognition::Tag::VERIFIED) {
      hist << "source[" << id << "]: " << cell.value().content << "\n";
    }
    for (auto p : cell.value().derivation) frontier.push_back(p);
  }
  ctx.c_hist = hist.str();

  std::ostringstream params;
  params << action.op_name;
  for (const auto& [name, cell] : action.params) {
    auto c = memory_.read(cell);
    params << " " << name << "=" << (c.ok() ? c.value().content : "<unreadable>");
  }
  ctx.params_text = params.str();
  return ctx;
}

std::optional<TrustToken> ExecController::trust_token(const TokenId& session,
                                                      CriticalNodeCategory category) const {
  std::lock_guard lk(mu_);
  auto it = trust_.find({session, category});
  if (it == trust_.end()) return std::nullopt;
  return it->second;
}

Decision ExecController::finish(const session::SessionToken& token, const Digest& actor,
                                const cognition::PlannedAction& action, Outcome outcome,
                                const std::string& reason, bool execute,
                                const std::string& mode) {
  std::string payload = "decision api=" + action.op_name +
                        " outcome=" + std::string(outcome_name(outcome)) +
                        (execute ? " effect=execute" : " effect=suppressed") + " mode=" + mode +
                        " params=" + params_digest(action);
  if (!reason.empty()) payload += " reason=\"" + reason + "\"";
  (void)log_.append(token.token_id, actor, audit::Event::DECISION, audit::Severity::INFO, payload);
  return Decision{outcome, reason, execute};
}

void ExecController::publish_one_locked(const PendingVerdict& pv) {
  bool consistent = pv.verdict == judge::Decision::kDirectPass;
  (void)log_.append(pv.session, Digest{}, audit::Event::DECISION,
                    consistent ? audit::Severity::INFO : audit::Severity::WARN,
                    "async-verdict api=" + pv.api + " category=" +
                        std::string(category_name(pv.category)) +
                        " result=" + (consistent ? "consistent" : "inconsistent"));
  if (consistent) return;
  auto it = trust_.find({pv.session, pv.category});
  if (it != trust_.end() && it->second.live) {
    it->second.live = false;
    (void)log_.append(pv.session, Digest{}, audit::Event::REVOCATION, audit::Severity::WARN,
                      "trust-token revoked category=" + std::string(category_name(pv.category)));
  }
  (void)log_.append(pv.session, Digest{}, audit::Event::ALERT, audit::Severity::CRITICAL,
                    "security-alert post-hoc inconsistency api=" + pv.api + " rationale=\"" +
                        pv.rationale + "\"");
}

void ExecController::publish_pending_locked(const TrustKey& key) {
  std::vector<PendingVerdict> due;
  auto it = pending_.begin();
  while (it != pending_.end()) {
    if (it->session == key.first && it->category == key.second) {
      due.push_back(*it);
      it = pending_.erase(it);
    } else {
      ++it;
    }
  }
  for (const auto& pv : due) publish_one_locked(pv);
}

void ExecController::drain_async() {
  std::lock_guard lk(mu_);
  auto pending = std::move(pending_);
  pending_.clear();
  for (const auto& pv : pending) publish_one_locked(pv);
}

AuthResult ExecController::authorize(const session::SessionToken& token,
                                     const cognition::PlannedAction& action,
                                     const std::set<SemanticPermission>& p_req,
                                     cognition::Trajectory& traj,
                                     approval::ApprovalProvider& approval) {
  Digest actor = actor_of(token);
  cognition::PlannedAction effective = action;

  if (kernel_.mode() == session::KernelMode::Passthrough) {
    if (action.critical()) {
      (void)log_.append(token.token_id, actor, audit::Event::SENSITIVE_OP,
                        audit::Severity::CRITICAL,
                        "intercept api=" + action.op_name + " category=" +
                            std::string(category_name(*action.op_kind)) + " mode=passthrough");
    }
    auto d = finish(token, actor, effective, Outcome::DirectPass, "", true, "passthrough");
    traj.actions.push_back(effective);
    return {d, effective};
  }

  if (!action.critical()) {
    auto d = finish(token, actor, effective, Outcome::DirectPass, "benign operation", true,
                    "benign");
    traj.actions.push_back(effective);
    return {d, effective};
  }

  CriticalNodeCategory category = *action.op_kind;
  // Execution is suspended from here until a Decision is recorded.
  (void)log_.append(token.token_id, actor, audit::Event::SENSITIVE_OP, audit::Severity::CRITICAL,
                    "intercept api=" + action.op_name +
                        " category=" + std::string(category_name(category)));

  auto priv = check_privilege(token, {p_req, action.op_name}, approval);
  if (!priv.granted) {
    return {finish(token, actor, effective, Outcome::Blocked, priv.reason, false, "sync"),
            effective};
  }

  // Taint policy first; tainted parameters need human declassification.
  auto sink = memory_.check_sink(effective);
  if (!sink.ok()) {
    return {finish(token, actor, effective, Outcome::Blocked, sink.error().to_string(), false,
                   "sync"),
            effective};
  }
  if (!sink.value().clear) {
    for (uint64_t tainted : sink.value().tainted_cells) {
      std::string prompt_id;
      {
        std::lock_guard lk(mu_);
        prompt_id = "declassify:" + token.principal.developer + ":" +
                    std::to_string(confirm_seq_["declassify:" + token.principal.developer]++);
      }
      auto declass = memory_.declassify(tainted, approval, token.token_id, prompt_id);
      if (!declass.ok() || !declass.value().has_value()) {
        (void)log_.append(token.token_id, actor, audit::Event::ALERT, audit::Severity::WARN,
                          "block stage=cognition reason=taint api=" + action.op_name + " cell=" +
                              std::to_string(tainted));
        return {finish(token, actor, effective, Outcome::Blocked,
                       "no-write-down: declassification refused for cell " +
                           std::to_string(tainted),
                       false, "sync"),
                effective};
      }
      for (auto& [name, cell] : effective.params) {
        if (cell == tainted) cell = declass.value()->cell_id;
      }
    }
    (void)log_.append(token.token_id, actor, audit::Event::DECISION, audit::Severity::INFO,
                      "stage=taint api=" + action.op_name + " result=declassified");
  } else {
    (void)log_.append(token.token_id, actor, audit::Event::DECISION, audit::Severity::INFO,
                      "stage=taint api=" + action.op_name + " result=clear");
  }

  if (category == CriticalNodeCategory::NETWORK_EGRESS) {
    std::string host;
    auto host_param = effective.params.find("host");
    if (host_param != effective.params.end()) {
      if (auto c = memory_.read(host_param->second); c.ok()) host = c.value().content;
    }
    auto eg = egress_filter(token, host);
    if (!eg.proceed) {
      return {finish(token, actor, effective, Outcome::SecurityAlert,
                     "egress to " + eg.host + " is outside the declared allowlist", false, "sync"),
              effective};
    }
  }

  auto alignment = cognition::check_alignment(traj, effective, memory_);
  if (alignment.result != cognition::Alignment::Consistent) {
    std::string why = alignment.result == cognition::Alignment::Drift ? "drift" : "justification";
    (void)log_.append(token.token_id, actor, audit::Event::ALERT, audit::Severity::WARN,
                      "block stage=cognition reason=" + why + " api=" + action.op_name +
                          " detail=\"" + alignment.reason + "\"");
    return {finish(token, actor, effective, Outcome::Blocked, alignment.reason, false, "sync"),
            effective};
  }
  (void)log_.append(token.token_id, actor, audit::Event::DECISION, audit::Severity::INFO,
                    "stage=alignment api=" + action.op_name + " result=consistent");

  auto ctx = build_verification_context(traj, effective, category);

  bool optimistic_path = false;
  {
    std::lock_guard lk(mu_);
    if (config_.optimistic) {
      TrustKey key{token.token_id, category};
      int pending_count = 0;
      for (const auto& pv : pending_) {
        if (pv.session == key.first && pv.category == key.second) ++pending_count;
      }
      if (pending_count >= config_.window) publish_pending_locked(key);
      auto it = trust_.find(key);
      optimistic_path = it != trust_.end() && it->second.live;
    }
  }

  if (optimistic_path) {
    // Release immediately; the validator verdict lands asynchronously.
    std::string rationale;
    auto verdict = validate_action(ctx, &rationale);
    {
      std::lock_guard lk(mu_);
      pending_.push_back({token.token_id, category, action.op_name, verdict, rationale});
    }
    auto d = finish(token, actor, effective, Outcome::DirectPass, "trust-token fast path", true,
                    "optimistic");
    traj.actions.push_back(effective);
    return {d, effective};
  }

  std::string rationale;
  auto verdict = validate_action(ctx, &rationale);
  (void)log_.append(token.token_id, actor, audit::Event::DECISION, audit::Severity::INFO,
                    "stage=validator api=" + action.op_name + " result=" +
                        std::string(judge::decision_name(verdict)) + " rationale=\"" + rationale +
                        "\"");

  if (verdict == judge::Decision::kDirectPass) {
    if (config_.optimistic) {
      std::lock_guard lk(mu_);
      TrustKey key{token.token_id, category};
      // A revoked (session, category) pair never re-arms; only a first-time
      // Direct Pass mints.
      if (!trust_.count(key)) {
        trust_[key] = TrustToken{token.token_id, category, log_.next_record_id(), true};
        (void)log_.append(token.token_id, actor, audit::Event::DECISION, audit::Severity::INFO,
                          "trust-token minted category=" + std::string(category_name(category)));
      }
    }
    auto d = finish(token, actor, effective, Outcome::DirectPass, rationale, true, "sync");
    traj.actions.push_back(effective);
    return {d, effective};
  }

  // UserConfirmationRequired: hold execution and prompt.
  std::string prompt_id;
  {
    std::lock_guard lk(mu_);
    prompt_id = "confirm-action:" + action.op_name + ":" +
                std::to_string(confirm_seq_["confirm-action:" + action.op_name]++);
  }
  approval::ApprovalRequest areq;
  areq.prompt_id = prompt_id;
  areq.kind = approval::PromptKind::ConfirmAction;
  areq.summary = "confirm " + action.op_name + " (" + std::string(category_name(category)) +
                 "): " + rationale;
  areq.preview = ctx.params_text;
  auto choice = approval.decide(areq);
  if (choice.ok() && choice.value() == approval::Choice::Authorize) {
    auto d = finish(token, actor, effective, Outcome::UserConfirmationRequired,
                    "user confirmed: " + rationale, true, "confirmed");
    traj.actions.push_back(effective);
    return {d, effective};
  }
  std::string why = choice.ok() ? "user denied" : choice.error().to_string();
  (void)log_.append(token.token_id, actor, audit::Event::ALERT, audit::Severity::WARN,
                    "block stage=execution reason=validator api=" + action.op_name + " detail=\"" +
                        why + ": " + rationale + "\"");
  return {finish(token, actor, effective, Outcome::Blocked, why + ": " + rationale, false, "sync"),
          effective};
}

}  // namespace aura::exec
