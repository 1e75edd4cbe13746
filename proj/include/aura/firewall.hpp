#pragma once

#include "aura/approval.hpp"
#include "aura/session.hpp"

namespace aura::judge {
class JudgeRouter;
}

namespace aura::firewall {

// Structured observation emitted by an AA, signed with its kernel-held key.
struct ObservationEnvelope {
  std::string payload;
  AgentDid origin;
  TokenId session{};
  uint64_t step_stamp = 0;
  std::string resource_id;
  Signature signature{};
  std::optional<platform::AttestationToken> attestation;

  Bytes signed_payload() const;
  Digest digest() const;
};

struct EnvelopeVerdict {
  bool accepted = false;
  std::string reason;  // "signature" | "stale" | "unknown-origin" | ...
};

enum class EntityKind : uint8_t { CREDIT_CARD, EMAIL, NATIONAL_ID, PHONE, PASSCODE, ADDRESS };
enum class EntitySource : uint8_t { Regex, Ner };

std::string_view entity_kind_name(EntityKind k);

struct SensitiveEntity {
  EntityKind kind;
  size_t start = 0;  // byte offsets into the scanned text, [start, end)
  size_t end = 0;
  EntitySource source = EntitySource::Regex;

  auto operator<=>(const SensitiveEntity&) const = default;
};

enum class SegmentTag : uint8_t { SYS, USER, AGENT_OBS, HISTORY, REINFORCE };

std::string_view segment_tag_name(SegmentTag t);

struct Segment {
  SegmentTag tag;
  std::string body;

  bool operator==(const Segment&) const = default;
};

// Isolated prompt context. Only the firewall can mint one, so a raw string
// can never impersonate screened agent input downstream.
class PromptContext {
 public:
  const std::vector<Segment>& segments() const { return segments_; }

  // <tag>escaped-body</tag> lines, in segment order. Bodies are entity-escaped
  // (& < >), so no payload byte sequence can close its delimiter.
  std::string render() const;

 private:
  friend class Firewall;
  explicit PromptContext(std::vector<Segment> segments) : segments_(std::move(segments)) {}
  std::vector<Segment> segments_;
};

// Inverse of PromptContext::render. Returns nullopt on any framing violation.
std::optional<std::vector<Segment>> parse_rendered_context(const std::string& rendered);

std::string escape_body(std::string_view body);
std::string unescape_body(std::string_view body);

// Appended after all user and agent data; directs the model to treat the
// preceding data sections as inert.
extern const char* const kReinforceDirective;

enum class IntentStage : uint8_t { Local, Cloud };

struct IntentVerdict {
  IntentStage stage = IntentStage::Local;
  bool allow = true;
  std::optional<std::string> matched;  // blacklist term or judge rationale
  bool judge_unavailable = false;
};

enum class GateAction : uint8_t { Transmit, Redacted, Terminated };

struct GateResult {
  GateAction action = GateAction::Transmit;
  std::string text;  // redacted text when action == Redacted
};

std::string redact(const std::string& text, const std::vector<SensitiveEntity>& entities);

// One term per line, '#' comments.
Result<std::vector<std::string>> load_blacklist(const std::string& path);

struct FirewallConfig {
  std::vector<std::string> blacklist;
  // National-ID shape: '#' matches a digit, anything else is literal.
  std::string national_id_shape = "###-##-####";
  // Gazetteer for the dictionary recognizer fallback lives in the judge
  // module; the firewall only routes to whatever RECOGNIZER is registered.
};

// The perception boundary: envelope verification, hybrid sensitive-entity
// detection, HITL gating, context assembly, and two-stage intent filtering.
// Stateless besides the loaded blacklist; safe for concurrent use.
class Firewall {
 public:
  Firewall(session::Kernel& kernel, audit::AuditLog& log, judge::JudgeRouter* judges,
           FirewallConfig config);

  EnvelopeVerdict verify_envelope(const ObservationEnvelope& env);

  std::vector<SensitiveEntity> detect_sensitive(const std::string& text) const;

  // HITL protocol for detected entities: authorize, redact, or terminate.
  // An unavailable approval channel terminates (fail closed).
  GateResult gate_sensitive(const std::string& text, const std::vector<SensitiveEntity>& entities,
                            approval::ApprovalProvider& approval, const TokenId& session,
                            const std::string& prompt_id);

  Result<PromptContext> build_context(const std::string& sys, const std::string& user_input,
                                      const std::vector<ObservationEnvelope>& observations,
                                      const std::vector<std::string>& history,
                                      const std::string& reinforce = kReinforceDirective) const;

  // Local blacklist screen, then (when a judge is registered and the context
  // is flagged sensitive) the cloud adjudicator. A failing judge allows with
  // an audit warning; the stage is optional by design.
  IntentVerdict filter_intent(const std::string& user_input, const TokenId& session,
                              bool sensitive_context);

  const std::vector<std::string>& blacklist() const { return config_.blacklist; }

  // For unit tests: contexts cannot be built outside the firewall, so expose
  // a factory the tests drive through a firewall instance.
  PromptContext context_of(std::vector<Segment> segments) const {
    return PromptContext(std::move(segments));
  }

 private:
  bool enforced() const;

  session::Kernel& kernel_;
  audit::AuditLog& log_;
  judge::JudgeRouter* judges_;
  FirewallConfig config_;
  mutable std::mutex mu_;
  std::set<Digest> accepted_;
};

}  // namespace aura::firewall
