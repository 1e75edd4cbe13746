#pragma once

#include <functional>
#include <memory>

#include "aura/firewall.hpp"

namespace aura::judge {

enum class Role : uint8_t { PLANNER, ACTION_JUDGE, INTENT_JUDGE, RECOGNIZER };

std::string_view role_name(Role r);

// Closed per-role decision sets.
enum class Decision : uint8_t {
  // ACTION_JUDGE
  kDirectPass,
  kUserConfirmationRequired,
  // INTENT_JUDGE
  kAllow,
  kReject,
  // RECOGNIZER
  kFound,
  kNone,
  // PLANNER
  kPropose,
  kDone,
};

std::string_view decision_name(Decision d);
std::optional<Decision> decision_from_name(std::string_view name);
bool decision_valid_for(Role role, Decision d);

// Verification tuple for the runtime alignment validator: user intent,
// trajectory summary (verified cells only), and the literal candidate action.
struct VerificationContext {
  std::string i_user;
  std::string c_hist;
  CriticalNodeCategory category = CriticalNodeCategory::PRIVACY_ACCESS;
  std::string params_text;  // "name=value" pairs, resolved
};

// Queries carry firewall-built structures only; a bare string is not
// representable.
struct JudgeQuery {
  Role role = Role::ACTION_JUDGE;
  std::variant<VerificationContext, firewall::PromptContext> context;
  std::map<std::string, std::string> options;

  // Stable key for fixture judges and caching.
  std::string canonical_key() const;
};

struct JudgeVerdict {
  Decision decision = Decision::kDirectPass;
  std::string rationale;
  double confidence = 1.0;  // rule judges are certain by definition
};

// The single boundary behind which every LLM-shaped role sits. Deterministic
// rule/fixture judges back the shipped build; external judges plug in behind
// the same interface. Callers apply their own fail direction on
// JudgeUnavailable.
class Judge {
 public:
  virtual ~Judge() = default;
  virtual Result<JudgeVerdict> judge(const JudgeQuery& query) = 0;
};

class JudgeRouter {
 public:
  void register_judge(Role role, std::shared_ptr<Judge> judge);
  bool has(Role role) const;
  Result<JudgeVerdict> judge(const JudgeQuery& query) const;

 private:
  mutable std::mutex mu_;
  std::map<Role, std::shared_ptr<Judge>> judges_;
};

// Deterministic ACTION_JUDGE:
//  (a) category risk table: FINANCIAL and SYSTEM_INTEGRITY always confirm;
//  (b) negative constraints: a source-declared "do not include X" whose
//      labeled value ("X: v") appears in the outbound parameters confirms;
//  (c) content-policy lexicon match in the outbound parameters confirms.
// Everything else passes.
class RuleActionJudge : public Judge {
 public:
  explicit RuleActionJudge(std::vector<std::string> content_lexicon = {});
  Result<JudgeVerdict> judge(const JudgeQuery& query) override;

 private:
  std::vector<std::string> lexicon_;
};

// Deterministic INTENT_JUDGE: rejects when the screened text matches the
// content-policy lexicon.
class RuleIntentJudge : public Judge {
 public:
  explicit RuleIntentJudge(std::vector<std::string> content_lexicon);
  Result<JudgeVerdict> judge(const JudgeQuery& query) override;

 private:
  std::vector<std::string> lexicon_;
};

// Deterministic RECOGNIZER standing in for a learned NER model: a gazetteer
// of known phrases plus a passcode trigger rule. Spans are returned in the
// rationale as "KIND:start:end" entries separated by ';'.
class DictionaryRecognizer : public Judge {
 public:
  struct GazetteerEntry {
    std::string phrase;  // matched case-insensitively
    firewall::EntityKind kind = firewall::EntityKind::ADDRESS;
  };

  explicit DictionaryRecognizer(std::vector<GazetteerEntry> gazetteer = {});
  Result<JudgeVerdict> judge(const JudgeQuery& query) override;

 private:
  std::vector<GazetteerEntry> gazetteer_;
};

std::vector<firewall::SensitiveEntity> parse_recognizer_spans(const std::string& rationale);

// Replays recorded verdicts keyed by options["fixture_key"] (falling back to
// the query's canonical key). Missing keys report JudgeUnavailable.
class FixtureJudge : public Judge {
 public:
  FixtureJudge() = default;
  explicit FixtureJudge(std::map<std::string, JudgeVerdict> fixtures)
      : fixtures_(std::move(fixtures)) {}

  void record(const std::string& key, JudgeVerdict verdict);
  Result<JudgeVerdict> judge(const JudgeQuery& query) override;

  // Fixture file: JSON object of key -> {"decision": ..., "rationale": ...}.
  static Result<FixtureJudge> from_file(const std::string& path);

 private:
  std::map<std::string, JudgeVerdict> fixtures_;
};

// Always unavailable; exercises fail-direction asymmetry.
class ErroringJudge : public Judge {
 public:
  Result<JudgeVerdict> judge(const JudgeQuery&) override {
    return Error{Errc::kJudgeUnavailable, "judge offline"};
  }
};

// Extensibility hooks named by the advanced robustness strategies; the
// shipped transforms are identity.
using ContextTransform = std::function<firewall::PromptContext(firewall::PromptContext)>;
ContextTransform few_shot_defense_hook();
ContextTransform cot_verification_hook();
ContextTransform adversarial_prefixing_hook();

// Shared content-policy lexicon (one term per line, '#' comments).
Result<std::vector<std::string>> load_content_lexicon(const std::string& path);

}  // namespace aura::judge
