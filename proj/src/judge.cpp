#include "aura/judge.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace aura::judge {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool contains_ci(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return false;
  return lower(haystack).find(lower(needle)) != std::string::npos;
}

bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (is_word(c)) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Extracts X from "do not include X" declarations; X runs to the end of the
// clause (',', '.', newline, or "when"/"while" connectives).
std::vector<std::string> negative_constraints(const std::string& text) {
  std::vector<std::string> out;
  std::string low = lower(text);
  const std::string marker = "do not include";
  size_t pos = 0;
  while ((pos = low.find(marker, pos)) != std::string::npos) {
    size_t start = pos + marker.size();
    size_t end = start;
    while (end < low.size() && low[end] != ',' && low[end] != '.' && low[end] != '\n') ++end;
    std::string clause = low.substr(start, end - start);
    for (const auto& cut : {" when ", " while ", " if "}) {
      auto c = clause.find(cut);
      if (c != std::string::npos) clause.resize(c);
    }
    auto ws = words_of(clause);
    if (!ws.empty()) {
      std::string phrase;
      for (const auto& w : ws) {
        if (!phrase.empty()) phrase += ' ';
        phrase += w;
      }
      out.push_back(phrase);
    }
    pos = end;
  }
  return out;
}

// Looks for a value labeled by the constrained noun: "X: v", "X = v" or
// "X is v". A separator is required so the constraint clause itself never
// reads as a label.
std::optional<std::string> labeled_value(const std::string& source, const std::string& label) {
  std::string low = lower(source);
  size_t pos = low.find(label);
  while (pos != std::string::npos) {
    size_t i = pos + label.size();
    while (i < low.size() && low[i] == ' ') ++i;
    bool separated = false;
    if (i < low.size() && (low[i] == ':' || low[i] == '=')) {
      ++i;
      separated = true;
    } else if (low.compare(i, 3, "is ") == 0) {
      i += 3;
      separated = true;
    }
    if (separated) {
      while (i < low.size() && low[i] == ' ') ++i;
      size_t j = i;
      while (j < low.size() && is_word(low[j])) ++j;
      if (j > i) return low.substr(i, j - i);
    }
    pos = low.find(label, pos + 1);
  }
  return std::nullopt;
}

std::string context_text(const JudgeQuery& q) {
  if (std::holds_alternative<VerificationContext>(q.context)) {
    const auto& v = std::get<VerificationContext>(q.context);
    return v.i_user + "\n" + v.c_hist + "\n" + v.params_text;
  }
  std::string out;
  for (const auto& seg : std::get<firewall::PromptContext>(q.context).segments()) {
    if (seg.tag == firewall::SegmentTag::USER || seg.tag == firewall::SegmentTag::AGENT_OBS) {
      out += seg.body;
      out.push_back('\n');
    }
  }
  return out;
}

}  // namespace

std::string_view role_name(Role r) {
  switch (r) {
    case Role::PLANNER: return "PLANNER";
    case Role::ACTION_JUDGE: return "ACTION_JUDGE";
    case Role::INTENT_JUDGE: return "INTENT_JUDGE";
    case Role::RECOGNIZER: return "RECOGNIZER";
  }
  return "UNKNOWN";
}

std::string_view decision_name(Decision d) {
  switch (d) {
    case Decision::kDirectPass: return "DirectPass";
    case Decision::kUserConfirmationRequired: return "UserConfirmationRequired";
    case Decision::kAllow: return "Allow";
    case Decision::kReject: return "Reject";
    case Decision::kFound: return "Found";
    case Decision::kNone: return "None";
    case Decision::kPropose: return "Propose";
    case Decision::kDone: return "Done";
  }
  return "UNKNOWN";
}

std::optional<Decision> decision_from_name(std::string_view name) {
  for (uint8_t i = 0; i <= static_cast<uint8_t>(Decision::kDone); ++i) {
    auto d = static_cast<Decision>(i);
    if (decision_name(d) == name) return d;
  }
  return std::nullopt;
}

bool decision_valid_for(Role role, Decision d) {
  switch (role) {
    case Role::ACTION_JUDGE:
      return d == Decision::kDirectPass || d == Decision::kUserConfirmationRequired;
    case Role::INTENT_JUDGE: return d == Decision::kAllow || d == Decision::kReject;
    case Role::RECOGNIZER: return d == Decision::kFound || d == Decision::kNone;
    case Role::PLANNER: return d == Decision::kPropose || d == Decision::kDone;
  }
  return false;
}

std::string JudgeQuery::canonical_key() const {
  CanonicalWriter w;
  w.field_u8(static_cast<uint8_t>(role));
  if (std::holds_alternative<VerificationContext>(context)) {
    const auto& v = std::get<VerificationContext>(context);
    w.field_str(v.i_user);
    w.field_str(v.c_hist);
    w.field_u8(static_cast<uint8_t>(v.category));
    w.field_str(v.params_text);
  } else {
    w.field_str(std::get<firewall::PromptContext>(context).render());
  }
  for (const auto& [k, v] : options) {
    w.field_str(k);
    w.field_str(v);
  }
  return hex_of(platform::hash(w.bytes())).substr(0, 16);
}

void JudgeRouter::register_judge(Role role, std::shared_ptr<Judge> judge) {
  std::lock_guard lk(mu_);
  judges_[role] = std::move(judge);
}

bool JudgeRouter::has(Role role) const {
  std::lock_guard lk(mu_);
  return judges_.count(role) > 0;
}

Result<JudgeVerdict> JudgeRouter::judge(const JudgeQuery& query) const {
  std::shared_ptr<Judge> j;
  {
    std::lock_guard lk(mu_);
    auto it = judges_.find(query.role);
    if (it == judges_.end()) {
      return Error{Errc::kJudgeUnavailable,
                   "no judge registered for role " + std::string(role_name(query.role))};
    }
    j = it->second;
  }
  auto verdict = j->judge(query);
  if (verdict.ok() && !decision_valid_for(query.role, verdict.value().decision)) {
    return Error{Errc::kBadInput, "verdict outside the role's decision set"};
  }
  return verdict;
}

RuleActionJudge::RuleActionJudge(std::vector<std::string> content_lexicon)
    : lexicon_(std::move(content_lexicon)) {}

Result<JudgeVerdict> RuleActionJudge::judge(const JudgeQuery& query) {
  if (query.role != Role::ACTION_JUDGE) return Error{Errc::kUnknownRole, "ACTION_JUDGE only"};
  if (!std::holds_alternative<VerificationContext>(query.context)) {
    return Error{Errc::kBadInput, "action judge expects a verification context"};
  }
  const auto& ctx = std::get<VerificationContext>(query.context);

  if (ctx.category == CriticalNodeCategory::FINANCIAL ||
      ctx.category == CriticalNodeCategory::SYSTEM_INTEGRITY) {
    return JudgeVerdict{Decision::kUserConfirmationRequired,
                        "category " + std::string(category_name(ctx.category)) +
                            " always requires confirmation"};
  }

  std::string sources = ctx.c_hist + "\n" + ctx.params_text;
  for (const auto& constraint : negative_constraints(sources)) {
    std::string needle = constraint;
    if (auto v = labeled_value(sources, constraint)) needle = *v;
    if (contains_ci(ctx.params_text, needle)) {
      return JudgeVerdict{Decision::kUserConfirmationRequired,
                          "outbound parameters violate source constraint: do not include " +
                              constraint};
    }
  }

  for (const auto& term : lexicon_) {
    if (contains_ci(ctx.params_text, term)) {
      return JudgeVerdict{Decision::kUserConfirmationRequired,
                          "outbound parameters match content policy: " + term};
    }
  }

  return JudgeVerdict{Decision::kDirectPass, "consistent with user intent"};
}

RuleIntentJudge::RuleIntentJudge(std::vector<std::string> content_lexicon)
    : lexicon_(std::move(content_lexicon)) {}

Result<JudgeVerdict> RuleIntentJudge::judge(const JudgeQuery& query) {
  if (query.role != Role::INTENT_JUDGE) return Error{Errc::kUnknownRole, "INTENT_JUDGE only"};
  std::string text = context_text(query);
  for (const auto& term : lexicon_) {
    if (contains_ci(text, term)) {
      return JudgeVerdict{Decision::kReject, "content policy match: " + term};
    }
  }
  return JudgeVerdict{Decision::kAllow, "no policy match"};
}

DictionaryRecognizer::DictionaryRecognizer(std::vector<GazetteerEntry> gazetteer)
    : gazetteer_(std::move(gazetteer)) {}

Result<JudgeVerdict> DictionaryRecognizer::judge(const JudgeQuery& query) {
  if (query.role != Role::RECOGNIZER) return Error{Errc::kUnknownRole, "RECOGNIZER only"};
  std::string text = context_text(query);
  std::string low = lower(text);
  std::vector<firewall::SensitiveEntity> found;

  for (const auto& entry : gazetteer_) {
    std::string needle = lower(entry.phrase);
    size_t pos = 0;
    while ((pos = low.find(needle, pos)) != std::string::npos) {
      found.push_back({entry.kind, pos, pos + needle.size(), firewall::EntitySource::Ner});
      pos += needle.size();
    }
  }

  // Passcode trigger: "<trigger> [is|:|=] <token-with-a-digit>"
  static const std::vector<std::string> triggers = {"passcode", "password", "pin",
                                                    "verification code", "access code"};
  for (const auto& trig : triggers) {
    size_t pos = 0;
    while ((pos = low.find(trig, pos)) != std::string::npos) {
      size_t i = pos + trig.size();
      while (i < low.size() && (low[i] == ' ' || low[i] == ':' || low[i] == '=')) ++i;
      if (low.compare(i, 3, "is ") == 0) i += 3;
      size_t j = i;
      bool has_digit = false;
      while (j < low.size() && is_word(low[j])) {
        if (std::isdigit(static_cast<unsigned char>(low[j]))) has_digit = true;
        ++j;
      }
      if (has_digit && j - i >= 4 && j - i <= 12) {
        found.push_back({firewall::EntityKind::PASSCODE, i, j, firewall::EntitySource::Ner});
      }
      pos += trig.size();
    }
  }

  if (found.empty()) return JudgeVerdict{Decision::kNone, ""};
  std::sort(found.begin(), found.end());
  std::ostringstream enc;
  for (size_t i = 0; i < found.size(); ++i) {
    if (i) enc << ';';
    enc << entity_kind_name(found[i].kind) << ':' << found[i].start << ':' << found[i].end;
  }
  return JudgeVerdict{Decision::kFound, enc.str()};
}

std::vector<firewall::SensitiveEntity> parse_recognizer_spans(const std::string& rationale) {
  std::vector<firewall::SensitiveEntity> out;
  std::istringstream in(rationale);
  std::string item;
  while (std::getline(in, item, ';')) {
    auto c1 = item.find(':');
    auto c2 = item.rfind(':');
    if (c1 == std::string::npos || c2 == c1) continue;
    std::string kind_name = item.substr(0, c1);
    firewall::EntityKind kind;
    if (kind_name == "PASSCODE") kind = firewall::EntityKind::PASSCODE;
    else if (kind_name == "ADDRESS") kind = firewall::EntityKind::ADDRESS;
    else continue;  // recognizer emits only NER-covered kinds
    try {
      size_t start = std::stoull(item.substr(c1 + 1, c2 - c1 - 1));
      size_t end = std::stoull(item.substr(c2 + 1));
      if (end > start) out.push_back({kind, start, end, firewall::EntitySource::Ner});
    } catch (const std::exception&) {
      continue;
    }
  }
  return out;
}

void FixtureJudge::record(const std::string& key, JudgeVerdict verdict) {
  fixtures_[key] = std::move(verdict);
}

Result<JudgeVerdict> FixtureJudge::judge(const JudgeQuery& query) {
  std::string key;
  auto opt = query.options.find("fixture_key");
  key = opt != query.options.end() ? opt->second : query.canonical_key();
  auto it = fixtures_.find(key);
  if (it == fixtures_.end()) {
    return Error{Errc::kJudgeUnavailable, "no fixture for key " + key};
  }
  return it->second;
}

Result<FixtureJudge> FixtureJudge::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) return {Errc::kBadInput, "cannot open " + path};
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    return {Errc::kBadInput, std::string("fixture parse: ") + e.what()};
  }
  std::map<std::string, JudgeVerdict> fixtures;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    JudgeVerdict v;
    auto d = decision_from_name(it.value().value("decision", ""));
    if (!d) return {Errc::kBadInput, "bad decision in fixture " + it.key()};
    v.decision = *d;
    v.rationale = it.value().value("rationale", "");
    v.confidence = it.value().value("confidence", 1.0);
    fixtures[it.key()] = v;
  }
  return FixtureJudge(std::move(fixtures));
}

ContextTransform few_shot_defense_hook() {
  return [](firewall::PromptContext ctx) { return ctx; };
}
ContextTransform cot_verification_hook() {
  return [](firewall::PromptContext ctx) { return ctx; };
}
ContextTransform adversarial_prefixing_hook() {
  return [](firewall::PromptContext ctx) { return ctx; };
}

Result<std::vector<std::string>> load_content_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) return {Errc::kBadInput, "cannot open " + path};
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto h = line.find('#');
    if (h != std::string::npos) line.resize(h);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\r' || line.back() == '\t')) {
      line.pop_back();
    }
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    out.push_back(line.substr(start));
  }
  return out;
}

}  // namespace aura::judge
