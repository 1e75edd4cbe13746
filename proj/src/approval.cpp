#include "aura/approval.hpp"

#include <iostream>

namespace aura::approval {

std::string_view prompt_kind_name(PromptKind k) {
  switch (k) {
    case PromptKind::SensitiveTransmission: return "sensitive-transmission";
    case PromptKind::Declassify: return "declassify";
    case PromptKind::PermissionGrant: return "permission-grant";
    case PromptKind::ConfirmAction: return "confirm-action";
  }
  return "unknown";
}

std::string_view choice_name(Choice c) {
  switch (c) {
    case Choice::Authorize: return "authorize";
    case Choice::Redact: return "redact";
    case Choice::Deny: return "deny";
  }
  return "unknown";
}

std::optional<Choice> choice_from_name(std::string_view name) {
  if (name == "authorize" || name == "y" || name == "yes") return Choice::Authorize;
  if (name == "redact" || name == "r") return Choice::Redact;
  if (name == "deny" || name == "n" || name == "no") return Choice::Deny;
  return std::nullopt;
}

Result<Choice> InteractiveApprovalProvider::decide(const ApprovalRequest& req) {
  out_ << "+--- confirmation required [" << prompt_kind_name(req.kind) << "] ---\n"
       << "| " << req.summary << "\n";
  if (!req.preview.empty()) out_ << "| preview: " << req.preview << "\n";
  bool redactable = req.kind == PromptKind::SensitiveTransmission;
  out_ << "| (" << req.prompt_id << ")\n"
       << "+--- " << (redactable ? "[y]es / [n]o / [r]edact" : "[y]es / [n]o") << ": "
       << std::flush;
  std::string line;
  if (!std::getline(in_, line)) {
    return Error{Errc::kApprovalUnavailable, "input stream closed"};
  }
  auto c = choice_from_name(line);
  if (!c || (*c == Choice::Redact && !redactable)) {
    return Error{Errc::kApprovalUnavailable, "unrecognized answer: " + line};
  }
  return *c;
}

}  // namespace aura::approval
