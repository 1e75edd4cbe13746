#include "aura/sim/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>

namespace aura::sim {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool contains_ci(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return false;
  return lower(haystack).find(lower(needle)) != std::string::npos;
}

Result<ScenarioCheck> parse_check(const json& j) {
  ScenarioCheck c;
  c.target = j.value("target", "");
  c.path = j.value("path", "");
  c.value = j.value("value", "");
  std::string op = j.value("op", "contains");
  if (op == "contains") c.op = ScenarioCheck::Op::Contains;
  else if (op == "not_contains") c.op = ScenarioCheck::Op::NotContains;
  else if (op == "equals") c.op = ScenarioCheck::Op::Equals;
  else if (op == "exists") c.op = ScenarioCheck::Op::Exists;
  else if (op == "empty") c.op = ScenarioCheck::Op::Empty;
  else return {Errc::kScenarioInvalid, "unknown check op " + op};
  if (c.target.empty()) return {Errc::kScenarioInvalid, "check needs a target"};
  return c;
}

}  // namespace

GuardVerdict aa_guard(const RefusalPolicy& policy, const std::string& target_content,
                      std::string* matched) {
  for (const auto& term : policy.refuse_terms) {
    if (contains_ci(target_content, term)) {
      if (matched) *matched = term;
      return GuardVerdict::Refuse;
    }
  }
  for (const auto& term : policy.escalate_terms) {
    if (contains_ci(target_content, term)) {
      if (matched) *matched = term;
      return GuardVerdict::Escalate;
    }
  }
  return GuardVerdict::Proceed;
}

Result<Scenario> parse_scenario(const json& doc) {
  Scenario sc;
  sc.id = doc.value("id", "");
  if (sc.id.empty()) return {Errc::kScenarioInvalid, "missing id"};
  std::string kind = doc.value("kind", "");
  if (kind != "benign" && kind != "attack") {
    return {Errc::kScenarioInvalid, sc.id + ": kind must be benign|attack"};
  }
  sc.attack = kind == "attack";
  sc.step_budget = doc.value("step_budget", 200);

  if (!doc.contains("agents") || !doc["agents"].is_array() || doc["agents"].empty()) {
    return {Errc::kScenarioInvalid, sc.id + ": at least one agent required"};
  }
  for (const auto& a : doc["agents"]) {
    ScenarioAgent agent;
    agent.name = a.value("name", "");
    if (agent.name.empty()) return {Errc::kScenarioInvalid, sc.id + ": agent needs a name"};
    auto cat = registry::app_category_from_name(a.value("category", ""));
    if (!cat) return {Errc::kScenarioInvalid, sc.id + ": bad category for " + agent.name};
    agent.category = *cat;
    for (const auto& p : a.value("permissions", json::array())) {
      auto perm = permission_from_name(p.get<std::string>());
      if (!perm) return {Errc::kScenarioInvalid, sc.id + ": bad permission for " + agent.name};
      agent.permissions.insert(*perm);
    }
    for (const auto& d : a.value("allowlist", json::array())) {
      agent.allowlist.insert(lower(d.get<std::string>()));
    }
    agent.forged = a.value("forged", false);
    for (const auto& t : a.value("refuse_terms", json::array())) {
      agent.refusal.refuse_terms.push_back(t.get<std::string>());
    }
    for (const auto& t : a.value("escalate_terms", json::array())) {
      agent.refusal.escalate_terms.push_back(t.get<std::string>());
    }
    agent.initial_state = a.value("state", json::object());
    sc.agents.push_back(std::move(agent));
  }

  if (!doc.contains("script") || !doc["script"].is_array() || doc["script"].empty()) {
    return {Errc::kScenarioInvalid, sc.id + ": empty script"};
  }
  static const std::set<std::string> kOps = {"user_input", "invoke", "observe", "derive",
                                             "screen",     "sanitize", "act"};
  for (const auto& s : doc["script"]) {
    ScenarioStep step;
    step.op = s.value("op", "");
    if (!kOps.count(step.op)) {
      return {Errc::kScenarioInvalid, sc.id + ": unknown step op " + step.op};
    }
    step.args = s;
    sc.script.push_back(std::move(step));
  }

  for (const auto& m : doc.value("adversary_moves", json::array())) {
    AdversaryMove move;
    move.kind = m.value("kind", "");
    move.at_step = m.value("at_step", 0);
    move.args = m;
    static const std::set<std::string> kMoves = {"forged_envelope", "fake_observation",
                                                 "blacklist_evasion_text", "tainted_source_write",
                                                 "endorsement_target"};
    if (!kMoves.count(move.kind)) {
      return {Errc::kUnknownMove, sc.id + ": adversary move " + move.kind};
    }
    sc.moves.push_back(std::move(move));
  }

  const json approvals = doc.value("approvals", json::object());
  for (auto it = approvals.begin(); it != approvals.end(); ++it) {
    auto choice = approval::choice_from_name(it.value().get<std::string>());
    if (!choice) return {Errc::kScenarioInvalid, sc.id + ": bad approval " + it.key()};
    sc.approvals[it.key()] = *choice;
  }

  const auto& expected = doc.contains("expected") ? doc["expected"] : json::object();
  if (sc.attack) {
    sc.expected_stage = expected.value("attack_blocked_at", "");
    static const std::set<std::string> kStages = {"identity", "firewall", "cognition",
                                                  "execution"};
    if (!kStages.count(sc.expected_stage)) {
      return {Errc::kScenarioInvalid, sc.id + ": attack scenario needs attack_blocked_at stage"};
    }
    if (!doc.contains("attack_checks")) {
      return {Errc::kScenarioInvalid, sc.id + ": attack scenario needs attack_checks"};
    }
  } else if (expected.value("verdict", "task_success") != "task_success") {
    return {Errc::kScenarioInvalid, sc.id + ": benign scenario expects task_success"};
  }

  for (const auto& c : doc.value("task_checks", json::array())) {
    auto chk = parse_check(c);
    if (!chk.ok()) return chk.error();
    sc.task_checks.push_back(chk.value());
  }
  for (const auto& c : doc.value("attack_checks", json::array())) {
    auto chk = parse_check(c);
    if (!chk.ok()) return chk.error();
    sc.attack_checks.push_back(chk.value());
  }
  if (!sc.attack && sc.task_checks.empty()) {
    return {Errc::kScenarioInvalid, sc.id + ": benign scenario needs task_checks"};
  }
  return sc;
}

Result<Scenario> load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) return {Errc::kScenarioInvalid, "cannot open " + path};
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    return {Errc::kScenarioInvalid, path + ": " + e.what()};
  }
  return parse_scenario(doc);
}

Result<std::vector<Scenario>> load_scenario_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> paths;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.path().extension() == ".json") paths.push_back(entry.path().string());
  }
  if (ec) return {Errc::kScenarioInvalid, "cannot list " + dir};
  std::sort(paths.begin(), paths.end());
  std::vector<Scenario> out;
  for (const auto& p : paths) {
    auto sc = load_scenario(p);
    if (!sc.ok()) return sc.error();
    out.push_back(std::move(sc).take());
  }
  return out;
}

}  // namespace aura::sim
