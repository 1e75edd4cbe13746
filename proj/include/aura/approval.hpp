#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "aura/common.hpp"

namespace aura::approval {

enum class PromptKind : uint8_t {
  SensitiveTransmission,  // authorize | redact | deny
  Declassify,             // authorize | deny
  PermissionGrant,        // authorize | deny
  ConfirmAction,          // authorize | deny
};

std::string_view prompt_kind_name(PromptKind k);

// A confirmation card shown to the user. prompt_id is a stable key so
// scripted runs can answer deterministically.
struct ApprovalRequest {
  std::string prompt_id;
  PromptKind kind = PromptKind::ConfirmAction;
  std::string summary;
  std::string preview;  // cell content / action parameters shown on the card
};

enum class Choice : uint8_t { Authorize, Redact, Deny };

// Blocking human-in-the-loop boundary. Implementations must answer or report
// unavailability; callers fail closed on error.
class ApprovalProvider {
 public:
  virtual ~ApprovalProvider() = default;
  virtual Result<Choice> decide(const ApprovalRequest& req) = 0;
};

// Answers from a prompt_id -> choice table; unknown prompts use the default
// when one is set, otherwise report ApprovalUnavailable.
class ScriptedApprovalProvider : public ApprovalProvider {
 public:
  ScriptedApprovalProvider() = default;
  explicit ScriptedApprovalProvider(std::map<std::string, Choice> decisions,
                                    std::optional<Choice> fallback = std::nullopt)
      : decisions_(std::move(decisions)), fallback_(fallback) {}

  void set(const std::string& prompt_id, Choice c) { decisions_[prompt_id] = c; }
  void set_fallback(Choice c) { fallback_ = c; }

  Result<Choice> decide(const ApprovalRequest& req) override {
    ++prompt_count_;
    prompts_seen_.push_back(req.prompt_id);
    auto it = decisions_.find(req.prompt_id);
    if (it != decisions_.end()) return it->second;
    if (fallback_) return *fallback_;
    return Error{Errc::kApprovalUnavailable, "no scripted decision for " + req.prompt_id};
  }

  int prompt_count() const { return prompt_count_; }
  const std::vector<std::string>& prompts_seen() const { return prompts_seen_; }

 private:
  std::map<std::string, Choice> decisions_;
  std::optional<Choice> fallback_;
  int prompt_count_ = 0;
  std::vector<std::string> prompts_seen_;
};

// Always reports unavailability; used to exercise fail-closed paths.
class UnavailableApprovalProvider : public ApprovalProvider {
 public:
  Result<Choice> decide(const ApprovalRequest&) override {
    return Error{Errc::kApprovalUnavailable, "approval channel down"};
  }
};

// Prints the confirmation card and reads y/n/r from a stream (the CLI's
// interactive mode).
class InteractiveApprovalProvider : public ApprovalProvider {
 public:
  InteractiveApprovalProvider(std::istream& in, std::ostream& out) : in_(in), out_(out) {}
  Result<Choice> decide(const ApprovalRequest& req) override;

 private:
  std::istream& in_;
  std::ostream& out_;
};

std::optional<Choice> choice_from_name(std::string_view name);
std::string_view choice_name(Choice c);

}  // namespace aura::approval
