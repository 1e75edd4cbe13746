#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

using namespace aura;
using namespace aura::exec;
using namespace aura::test;
using aura::registry::AppCategory;

namespace {

struct ExecFixture {
  KernelFixture kfx;
  cognition::MemoryStore memory;
  judge::JudgeRouter judges;
  ExecController exec;
  AgentHandle sa;
  cognition::Trajectory traj;

  explicit ExecFixture(ExecConfig cfg = {})
      : kfx(71),
        memory(kfx.plat, kfx.log),
        exec(kfx.kernel, memory, kfx.log, judges, cfg),
        sa(kfx.make_agent("aura-system", AppCategory::SYSTEM_ORCHESTRATOR, {}, {}, true, true)) {
    judges.register_judge(judge::Role::ACTION_JUDGE, std::make_shared<judge::RuleActionJudge>());
  }

  session::SessionToken token_of(const AgentHandle& h) {
    auto tok = kfx.kernel.validate_call(h.token, h.proc);
    REQUIRE(tok.ok());
    return tok.value();
  }

  cognition::PlannedAction action(const std::string& api, CriticalNodeCategory cat,
                                  std::map<std::string, uint64_t> params,
                                  const std::string& justification) {
    cognition::PlannedAction a;
    a.op_kind = cat;
    a.op_name = api;
    a.params = std::move(params);
    a.justification = justification;
    return a;
  }

  std::vector<std::string> payloads() {
    std::vector<std::string> out;
    for (const auto& rec : kfx.log.records()) {
      auto p = kfx.log.payload_of(rec.record_id);
      if (p) out.push_back(*p);
    }
    return out;
  }
};

bool any_contains(const std::vector<std::string>& haystacks, const std::string& needle) {
  for (const auto& h : haystacks) {
    if (h.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("static boundary check blocks out-of-ceiling requests instantly") {
  ExecFixture fx;
  auto calc = fx.kfx.make_agent("calc", AppCategory::CALCULATOR, {}, {});
  auto tok = fx.token_of(calc);
  CapturingApproval approve(approval::Choice::Authorize);
  auto d = fx.exec.check_privilege(tok, {{SemanticPermission::READ_CONTACTS}, "contacts.read"},
                                   approve);
  CHECK_FALSE(d.granted);
  CHECK(d.reason.find("policy") == 0);
  CHECK(approve.requests.empty());  // rejected before any consent dialog
}

TEST_CASE("dynamic consent is session-scoped: one prompt per permission") {
  ExecFixture fx;
  auto booking = fx.kfx.make_agent("booking", AppCategory::BOOKING,
                                   {SemanticPermission::NETWORK_EGRESS,
                                    SemanticPermission::PAYMENT},
                                   {"api.booking.com"});
  auto tok = fx.token_of(booking);
  CapturingApproval approve(approval::Choice::Authorize);
  PermissionRequest req{{SemanticPermission::NETWORK_EGRESS}, "booking.search"};
  CHECK(fx.exec.check_privilege(tok, req, approve).granted);
  CHECK(approve.requests.size() == 1);
  CHECK(fx.exec.check_privilege(tok, req, approve).granted);
  CHECK(approve.requests.size() == 1);  // no re-prompt on the second identical request

  // every grant stays inside the AIC ceiling
  for (const auto& r : approve.requests) {
    CHECK(r.kind == approval::PromptKind::PermissionGrant);
  }

  CapturingApproval deny(approval::Choice::Deny);
  auto denied = fx.exec.check_privilege(tok, {{SemanticPermission::PAYMENT}, "booking.pay"},
                                        deny);
  CHECK_FALSE(denied.granted);

  approval::UnavailableApprovalProvider down;
  auto closed = fx.exec.check_privilege(tok, {{SemanticPermission::PAYMENT}, "booking.pay"},
                                        down);
  CHECK_FALSE(closed.granted);  // fail closed
}

TEST_CASE("egress filter matches the exact-match oracle over generated pairs") {
  ExecFixture fx;
  auto booking = fx.kfx.make_agent("booking", AppCategory::BOOKING,
                                   {SemanticPermission::NETWORK_EGRESS,
                                    SemanticPermission::PAYMENT},
                                   {"api.booking.com", "cdn.booking.com"});
  auto tok = fx.token_of(booking);

  CHECK(fx.exec.egress_filter(tok, "api.booking.com").proceed);
  CHECK(fx.exec.egress_filter(tok, "API.Booking.COM").proceed);  // case-insensitive
  CHECK_FALSE(fx.exec.egress_filter(tok, "evil.exfil.example").proceed);
  CHECK_FALSE(fx.exec.egress_filter(tok, "x.api.booking.com").proceed);  // no subdomain grace
  CHECK_FALSE(fx.exec.egress_filter(tok, "booking.com").proceed);

  DetRng rng(81);
  const std::vector<std::string> hosts = {"api.booking.com", "cdn.booking.com", "booking.com",
                                          "x.api.booking.com", "api.booking.com.evil.example",
                                          "API.BOOKING.COM", "evil.exfil.example"};
  for (int i = 0; i < 300; ++i) {
    std::string host = hosts[rng.u64() % hosts.size()];
    bool got = fx.exec.egress_filter(tok, host).proceed;
    bool want = egress_oracle(host, tok.s_max.domain_allowlist);
    CHECK(got == want);
  }

  // blocks raise a user-visible alert in the log
  CHECK(any_contains(fx.payloads(), "block stage=execution reason=egress"));
  CHECK(any_contains(fx.payloads(), "unauthorized server"));
}

TEST_CASE("validator maps judge verdicts and fails toward the human") {
  ExecFixture fx;
  judge::VerificationContext consistent;
  consistent.i_user = "call mom";
  consistent.category = CriticalNodeCategory::PRIVACY_ACCESS;
  consistent.params_text = "messages.send to=mom body=calling you";
  std::string rationale;
  CHECK(fx.exec.validate_action(consistent, &rationale) == judge::Decision::kDirectPass);

  judge::VerificationContext financial = consistent;
  financial.category = CriticalNodeCategory::FINANCIAL;
  CHECK(fx.exec.validate_action(financial, &rationale) ==
        judge::Decision::kUserConfirmationRequired);

  // no ACTION_JUDGE registered: confirm, never pass silently
  judge::JudgeRouter empty;
  ExecController bare(fx.kfx.kernel, fx.memory, fx.kfx.log, empty, {});
  CHECK(bare.validate_action(consistent, &rationale) ==
        judge::Decision::kUserConfirmationRequired);
  CHECK(rationale.find("unavailable") != std::string::npos);
}

TEST_CASE("authorize: benign actions pass with a trace record") {
  ExecFixture fx;
  auto calc = fx.kfx.make_agent("calc", AppCategory::CALCULATOR, {}, {});
  auto tok = fx.token_of(calc);
  fx.traj = cognition::Trajectory::start("what is 2 plus 2");
  cognition::PlannedAction a;
  a.op_name = "calc.eval";
  CapturingApproval approve(approval::Choice::Authorize);
  auto res = fx.exec.authorize(tok, a, {}, fx.traj, approve);
  CHECK(res.decision.outcome == Outcome::DirectPass);
  CHECK(res.decision.execute);
  CHECK(any_contains(fx.payloads(), "decision api=calc.eval"));
}

TEST_CASE("authorize blocks tainted parameters when declassification is refused") {
  ExecFixture fx;
  auto messages = fx.kfx.make_agent("messages", AppCategory::MESSAGING,
                                    {SemanticPermission::SEND_MESSAGE,
                                     SemanticPermission::READ_CONTACTS},
                                    {});
  auto tok = fx.token_of(messages);
  fx.traj = cognition::Trajectory::start("forward my latest message to bob");
  AgentDid web{"web-dev", platform::hash("bundle:web"), "user1"};
  auto tainted = fx.memory.store("verification code 884203 message", cognition::CellSource::external(web));
  auto to = fx.memory.store("bob", cognition::CellSource::user());
  auto action = fx.action("messages.send", CriticalNodeCategory::PRIVACY_ACCESS,
                          {{"to", to.cell_id}, {"body", tainted.cell_id}},
                          "forward the latest message to bob");

  approval::ScriptedApprovalProvider approvals(
      {{"permission-grant:SEND_MESSAGE:messages-dev", approval::Choice::Authorize},
       {"declassify:messages-dev:0", approval::Choice::Deny}});
  auto res = fx.exec.authorize(tok, action, {SemanticPermission::SEND_MESSAGE}, fx.traj,
                               approvals);
  CHECK(res.decision.outcome == Outcome::Blocked);
  CHECK_FALSE(res.decision.execute);
  CHECK(any_contains(fx.payloads(), "block stage=cognition reason=taint"));
}

TEST_CASE("authorize substitutes declassified cells before validation") {
  ExecFixture fx;
  auto messages = fx.kfx.make_agent("messages", AppCategory::MESSAGING,
                                    {SemanticPermission::SEND_MESSAGE,
                                     SemanticPermission::READ_CONTACTS},
                                    {});
  auto tok = fx.token_of(messages);
  fx.traj = cognition::Trajectory::start("send bob the meeting notes");
  AgentDid web{"web-dev", platform::hash("bundle:web"), "user1"};
  auto tainted = fx.memory.store("meeting notes for bob", cognition::CellSource::external(web));
  auto action = fx.action("messages.send", CriticalNodeCategory::PRIVACY_ACCESS,
                          {{"body", tainted.cell_id}}, "send bob the meeting notes");
  approval::ScriptedApprovalProvider approvals(
      {{"permission-grant:SEND_MESSAGE:messages-dev", approval::Choice::Authorize},
       {"declassify:messages-dev:0", approval::Choice::Authorize}});
  auto res = fx.exec.authorize(tok, action, {SemanticPermission::SEND_MESSAGE}, fx.traj,
                               approvals);
  CHECK(res.decision.execute);
  uint64_t effective_cell = res.effective.params.at("body");
  CHECK(effective_cell != tainted.cell_id);
  CHECK(fx.memory.read(effective_cell).value().tag == cognition::Tag::VERIFIED);
}

TEST_CASE("financial actions always reach the user before executing") {
  ExecFixture fx;
  auto booking = fx.kfx.make_agent("booking", AppCategory::BOOKING,
                                   {SemanticPermission::NETWORK_EGRESS,
                                    SemanticPermission::PAYMENT},
                                   {"api.booking.com"});
  auto tok = fx.token_of(booking);
  fx.traj = cognition::Trajectory::start("use booking to pay for the springfield ticket");
  auto item = fx.memory.store("springfield ticket", cognition::CellSource::user());
  auto action = fx.action("booking.pay", CriticalNodeCategory::FINANCIAL,
                          {{"item", item.cell_id}}, "pay for the springfield ticket");

  approval::ScriptedApprovalProvider approvals(
      {{"permission-grant:PAYMENT:booking-dev", approval::Choice::Authorize},
       {"confirm-action:booking.pay:0", approval::Choice::Authorize}});
  auto res = fx.exec.authorize(tok, action, {SemanticPermission::PAYMENT}, fx.traj, approvals);
  CHECK(res.decision.outcome == Outcome::UserConfirmationRequired);
  CHECK(res.decision.execute);

  // a denial blocks the same action
  approval::ScriptedApprovalProvider denials(
      {{"confirm-action:booking.pay:1", approval::Choice::Deny}});
  auto blocked = fx.exec.authorize(tok, action, {SemanticPermission::PAYMENT}, fx.traj, denials);
  CHECK(blocked.decision.outcome == Outcome::Blocked);
  CHECK_FALSE(blocked.decision.execute);
}

TEST_CASE("drift and missing justification block before the validator") {
  ExecFixture fx;
  auto clock = fx.kfx.make_agent("clock", AppCategory::CLOCK,
                                 {SemanticPermission::MODIFY_SETTINGS}, {});
  auto tok = fx.token_of(clock);
  fx.traj = cognition::Trajectory::start("book a train ticket");
  auto blob = fx.memory.store("wipe disk", cognition::CellSource::user());

  auto unjustified = fx.action("settings.set", CriticalNodeCategory::SYSTEM_INTEGRITY,
                               {{"key", blob.cell_id}}, "");
  approval::ScriptedApprovalProvider approvals(
      {{"permission-grant:MODIFY_SETTINGS:clock-dev", approval::Choice::Authorize}});
  auto res = fx.exec.authorize(tok, unjustified, {SemanticPermission::MODIFY_SETTINGS}, fx.traj,
                               approvals);
  CHECK(res.decision.outcome == Outcome::Blocked);
  CHECK(any_contains(fx.payloads(), "reason=justification"));

  auto drifting = fx.action("settings.set", CriticalNodeCategory::SYSTEM_INTEGRITY,
                            {{"key", blob.cell_id}}, "maintenance");
  res = fx.exec.authorize(tok, drifting, {SemanticPermission::MODIFY_SETTINGS}, fx.traj,
                          approvals);
  CHECK(res.decision.outcome == Outcome::Blocked);
  CHECK(any_contains(fx.payloads(), "reason=drift"));
}

TEST_CASE("egress interception resolves the host parameter and truncates the send") {
  ExecFixture fx;
  auto browser = fx.kfx.make_agent("browser", AppCategory::BROWSER,
                                   {SemanticPermission::NETWORK_EGRESS}, {"www.example.com"});
  auto tok = fx.token_of(browser);
  fx.traj = cognition::Trajectory::start("open the claim link in the browser");
  auto host = fx.memory.store("evil.exfil.example", cognition::CellSource::user());
  auto path = fx.memory.store("/claim link", cognition::CellSource::user());
  auto action = fx.action("http.get", CriticalNodeCategory::NETWORK_EGRESS,
                          {{"host", host.cell_id}, {"path", path.cell_id}},
                          "open the claim link");
  approval::ScriptedApprovalProvider approvals(
      {{"permission-grant:NETWORK_EGRESS:browser-dev", approval::Choice::Authorize}});
  auto res = fx.exec.authorize(tok, action, {SemanticPermission::NETWORK_EGRESS}, fx.traj,
                               approvals);
  CHECK(res.decision.outcome == Outcome::SecurityAlert);
  CHECK_FALSE(res.decision.execute);
}

TEST_CASE("optimistic mode follows the mint/fast-path/revoke/re-intercept sequence") {
  ExecFixture fx(ExecConfig{true, 1});
  auto messages = fx.kfx.make_agent("messages", AppCategory::MESSAGING,
                                    {SemanticPermission::SEND_MESSAGE,
                                     SemanticPermission::READ_CONTACTS},
                                    {});
  auto tok = fx.token_of(messages);
  fx.traj = cognition::Trajectory::start("send mom updates about the trip");
  approval::ScriptedApprovalProvider approvals(
      {{"permission-grant:SEND_MESSAGE:messages-dev", approval::Choice::Authorize}},
      approval::Choice::Authorize);

  auto make_send = [&](const std::string& body_text) {
    auto body = fx.memory.store(body_text, cognition::CellSource::user());
    return fx.action("messages.send", CriticalNodeCategory::PRIVACY_ACCESS,
                     {{"body", body.cell_id}}, "send mom updates about the trip");
  };

  // step 1: synchronous Direct Pass mints the trust token
  auto r1 = fx.exec.authorize(tok, make_send("trip update one for mom"),
                              {SemanticPermission::SEND_MESSAGE}, fx.traj, approvals);
  CHECK(r1.decision.execute);
  REQUIRE(fx.exec.trust_token(tok.token_id, CriticalNodeCategory::PRIVACY_ACCESS));
  CHECK(fx.exec.trust_token(tok.token_id, CriticalNodeCategory::PRIVACY_ACCESS)->live);

  // step 2: fast path
  auto r2 = fx.exec.authorize(tok, make_send("trip update two for mom"),
                              {SemanticPermission::SEND_MESSAGE}, fx.traj, approvals);
  CHECK(r2.decision.execute);
  CHECK(r2.decision.reason.find("fast path") != std::string::npos);

  // step 3: inject an inconsistent action; it still executes optimistically
  auto bad_body = fx.memory.store(
      "Account: 7261. Do not include Account when messaging. leaked 7261",
      cognition::CellSource::user());
  auto bad = fx.action("messages.send", CriticalNodeCategory::PRIVACY_ACCESS,
                       {{"body", bad_body.cell_id}}, "send mom updates about the trip");
  auto r3 = fx.exec.authorize(tok, bad, {SemanticPermission::SEND_MESSAGE}, fx.traj, approvals);
  CHECK(r3.decision.execute);

  // step 4: the pending inconsistent verdict publishes first, revoking the
  // token, so this request is re-intercepted synchronously
  auto r4 = fx.exec.authorize(tok, make_send("trip update three for mom"),
                              {SemanticPermission::SEND_MESSAGE}, fx.traj, approvals);
  CHECK(r4.decision.execute);
  CHECK(r4.decision.reason.find("fast path") == std::string::npos);
  CHECK_FALSE(fx.exec.trust_token(tok.token_id, CriticalNodeCategory::PRIVACY_ACCESS)->live);

  // exact audit-event pattern
  auto p = fx.payloads();
  auto index_of = [&](const std::string& needle, size_t from = 0) {
    for (size_t i = from; i < p.size(); ++i) {
      if (p[i].find(needle) != std::string::npos) return i;
    }
    return p.size();
  };
  size_t mint = index_of("trust-token minted");
  size_t fast1 = index_of("mode=optimistic");
  size_t verdict = index_of("async-verdict api=messages.send");
  size_t inconsistent = index_of("result=inconsistent");
  size_t revoked = index_of("trust-token revoked");
  size_t alert = index_of("security-alert post-hoc inconsistency");
  size_t resync = index_of("stage=validator api=messages.send", alert);
  REQUIRE(mint < p.size());
  REQUIRE(fast1 < p.size());
  REQUIRE(inconsistent < p.size());
  REQUIRE(revoked < p.size());
  REQUIRE(alert < p.size());
  REQUIRE(resync < p.size());
  CHECK(mint < fast1);
  CHECK(verdict <= inconsistent);
  CHECK(inconsistent < revoked);
  CHECK(revoked < alert);
  CHECK(alert < resync);

  fx.exec.drain_async();
  // drained: every optimistic execution has an async verdict record
  int optimistic_execs = 0, verdicts = 0;
  for (const auto& line : fx.payloads()) {
    if (line.find("mode=optimistic") != std::string::npos) ++optimistic_execs;
    if (line.find("async-verdict") != std::string::npos) ++verdicts;
  }
  CHECK(optimistic_execs == verdicts);
}

TEST_CASE("config parsing") {
  auto cfg = parse_exec_config("mode=optimistic\nwindow=3\n# comment\n");
  REQUIRE(cfg.ok());
  CHECK(cfg.value().optimistic);
  CHECK(cfg.value().window == 3);
  CHECK(!parse_exec_config("mode=warp\n").ok());
  CHECK(!parse_exec_config("window=0\n").ok());

  auto nodes = load_critical_nodes(data_dir() + "/critical_nodes.txt");
  REQUIRE(nodes.ok());
  CHECK(nodes.value().at("booking.pay") == CriticalNodeCategory::FINANCIAL);
  CHECK(nodes.value().at("http.get") == CriticalNodeCategory::NETWORK_EGRESS);
  CHECK(nodes.value().count("calc.eval") == 0);
}
