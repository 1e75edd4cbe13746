#pragma once

#include <functional>

#include "aura/approval.hpp"
#include "aura/audit.hpp"
#include "aura/platform.hpp"

namespace aura::cognition {

enum class Tag : uint8_t { VERIFIED, TAINTED };

std::string_view tag_name(Tag t);

// Data entry points. USER and VERIFIED_SA carry the ground truth of intent;
// everything external is tainted at ingestion.
struct CellSource {
  enum class Kind : uint8_t { USER, VERIFIED_SA, EXTERNAL } kind = Kind::USER;
  AgentDid external_origin;  // meaningful only for EXTERNAL

  static CellSource user() { return {Kind::USER, {}}; }
  static CellSource verified_sa() { return {Kind::VERIFIED_SA, {}}; }
  static CellSource external(AgentDid did) { return {Kind::EXTERNAL, std::move(did)}; }
};

struct MemoryCell {
  uint64_t cell_id = 0;
  std::string content;
  Tag tag = Tag::VERIFIED;
  // origin string: "user", "sa", or the external DID rendering
  std::string origin;
  std::vector<uint64_t> derivation;
  Digest integrity_mac{};
  bool declassified = false;  // created by an approved declassification

  Bytes mac_payload() const;
};

struct SinkVerdict {
  bool clear = true;
  std::vector<uint64_t> tainted_cells;
};

// Candidate step in an execution plan. Params reference memory cells, never
// raw strings, so provenance survives into enforcement.
struct PlannedAction {
  std::optional<CriticalNodeCategory> op_kind;  // nullopt = benign operation
  std::string op_name;                          // mock API name, e.g. "messages.send"
  std::map<std::string, uint64_t> params;
  std::string justification;
  bool requires_user_visible_justification = true;

  bool critical() const { return op_kind.has_value(); }
};

struct Trajectory {
  std::string user_instruction;
  std::vector<PlannedAction> actions;
  Digest goal_anchor{};

  static Trajectory start(const std::string& instruction);
};

enum class Alignment : uint8_t { Consistent, Drift, MissingJustification };

struct AlignmentVerdict {
  Alignment result = Alignment::Consistent;
  std::string reason;
};

class MemoryStore;

// Pluggable semantic drift detector; returns a reason when the candidate
// drifts from the anchored goal. The default is the deterministic
// content-word-overlap rule (zero shared words => drift).
using DriftDetector = std::function<std::optional<std::string>(
    const Trajectory&, const PlannedAction&, const MemoryStore&)>;

DriftDetector keyword_overlap_detector();

// Content words of a text: lowercase alphanumeric tokens minus a fixed
// stopword list. Exposed so tests can run the independent overlap oracle.
std::vector<std::string> content_words(const std::string& text);

// Taint-aware memory. Tags are assigned at the entry point, propagate through
// derivation, and are MAC-bound to the content under a kernel-held key.
class MemoryStore {
 public:
  MemoryStore(platform::Platform& plat, audit::AuditLog& log);

  MemoryCell store(const std::string& content, const CellSource& source);
  Result<MemoryCell> derive(const std::vector<uint64_t>& parents, const std::string& content);

  // MAC-checked read.
  Result<MemoryCell> read(uint64_t cell_id) const;

  // No-write-down check for a critical action's parameters.
  Result<SinkVerdict> check_sink(const PlannedAction& action) const;

  // Human-in-the-loop declassification: on approval a new VERIFIED cell is
  // created (original unchanged) and the event is audited. Denied or
  // unavailable approval leaves the taint in place.
  Result<std::optional<MemoryCell>> declassify(uint64_t cell_id,
                                               approval::ApprovalProvider& approval,
                                               const TokenId& session,
                                               const std::string& prompt_id);

  size_t size() const;
  std::vector<MemoryCell> all_cells() const;

  // Long-term store round-trip; MACs travel with the cells, so a forged tag
  // flip fails verification on load.
  Status save(const std::string& path) const;
  Status load(const std::string& path);

 private:
  MemoryCell make_cell_locked(const std::string& content, Tag tag, const std::string& origin,
                              std::vector<uint64_t> derivation, bool declassified);
  Digest mac_of(const MemoryCell& cell) const;

  platform::Platform& plat_;
  audit::AuditLog& log_;
  std::array<uint8_t, 32> mac_key_{};
  mutable std::mutex mu_;
  std::map<uint64_t, MemoryCell> cells_;
  uint64_t next_id_ = 1;
};

// Plan-trajectory alignment: missing justification on a critical candidate is
// rejected outright; otherwise the drift detector arbitrates.
AlignmentVerdict check_alignment(const Trajectory& traj, const PlannedAction& candidate,
                                 const MemoryStore& store,
                                 const DriftDetector& detector = keyword_overlap_detector());

}  // namespace aura::cognition
