#include "aura/cognition.hpp"

#include <sodium.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

namespace aura::cognition {

namespace {

const std::set<std::string>& stopwords() {
  static const std::set<std::string> kStop = {
      "a",  "an", "and", "are", "at",   "be",   "by", "for",  "from", "in", "is",
      "it", "my", "of",  "on",  "or",   "the",  "that", "to", "with", "me", "please"};
  return kStop;
}

}  // namespace

std::string_view tag_name(Tag t) {
  return t == Tag::VERIFIED ? "TAG_VERIFIED" : "TAG_TAINTED";
}

Bytes MemoryCell::mac_payload() const {
  CanonicalWriter w;
  w.field_str(content);
  w.field_u8(static_cast<uint8_t>(tag));
  w.field_str(origin);
  return w.take();
}

Trajectory Trajectory::start(const std::string& instruction) {
  Trajectory t;
  t.user_instruction = instruction;
  t.goal_anchor = platform::hash(instruction);
  return t;
}

std::vector<std::string> content_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 2 && !stopwords().count(cur)) out.push_back(cur);
    cur.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

DriftDetector keyword_overlap_detector() {
  return [](const Trajectory& traj, const PlannedAction& candidate,
            const MemoryStore& store) -> std::optional<std::string> {
    std::set<std::string> anchor;
    for (const auto& w : content_words(traj.user_instruction)) anchor.insert(w);
    for (const auto& a : traj.actions) {
      for (const auto& w : content_words(a.justification)) anchor.insert(w);
    }

    std::set<std::string> cand;
    for (const auto& w : content_words(candidate.op_name)) cand.insert(w);
    if (candidate.op_kind) {
      for (const auto& w : content_words(std::string(category_name(*candidate.op_kind)))) {
        cand.insert(w);
      }
    }
    for (const auto& [name, cell_id] : candidate.params) {
      auto cell = store.read(cell_id);
      if (!cell.ok()) continue;
      for (const auto& w : content_words(cell.value().content)) cand.insert(w);
    }

    for (const auto& w : cand) {
      if (anchor.count(w)) return std::nullopt;
    }
    return "no content-word overlap between candidate and anchored goal";
  };
}

MemoryStore::MemoryStore(platform::Platform& plat, audit::AuditLog& log)
    : plat_(plat), log_(log) {
  mac_key_ = plat_.derive_device_secret("memory-mac");
}

Digest MemoryStore::mac_of(const MemoryCell& cell) const {
  Bytes payload = cell.mac_payload();
  Digest mac{};
  crypto_auth_hmacsha256(mac.data(), payload.data(), payload.size(), mac_key_.data());
  return mac;
}

MemoryCell MemoryStore::make_cell_locked(const std::string& content, Tag tag,
                                         const std::string& origin,
                                         std::vector<uint64_t> derivation, bool declassified) {
  MemoryCell cell;
  cell.cell_id = next_id_++;
  cell.content = content;
  cell.tag = tag;
  cell.origin = origin;
  cell.derivation = std::move(derivation);
  cell.declassified = declassified;
  cell.integrity_mac = mac_of(cell);
  cells_[cell.cell_id] = cell;
  return cell;
}

MemoryCell MemoryStore::store(const std::string& content, const CellSource& source) {
  std::lock_guard lk(mu_);
  switch (source.kind) {
    case CellSource::Kind::USER:
      return make_cell_locked(content, Tag::VERIFIED, "user", {}, false);
    case CellSource::Kind::VERIFIED_SA:
      return make_cell_locked(content, Tag::VERIFIED, "sa", {}, false);
    case CellSource::Kind::EXTERNAL:
      return make_cell_locked(content, Tag::TAINTED, source.external_origin.render(), {}, false);
  }
  return {};
}

Result<MemoryCell> MemoryStore::derive(const std::vector<uint64_t>& parents,
                                       const std::string& content) {
  std::lock_guard lk(mu_);
  Tag tag = Tag::VERIFIED;
  for (uint64_t p : parents) {
    auto it = cells_.find(p);
    if (it == cells_.end()) return {Errc::kUnknownCell, std::to_string(p)};
    if (it->second.tag == Tag::TAINTED) tag = Tag::TAINTED;
  }
  return make_cell_locked(content, tag, "sa", parents, false);
}

Result<MemoryCell> MemoryStore::read(uint64_t cell_id) const {
  std::lock_guard lk(mu_);
  auto it = cells_.find(cell_id);
  if (it == cells_.end()) return {Errc::kUnknownCell, std::to_string(cell_id)};
  if (mac_of(it->second) != it->second.integrity_mac) {
    return {Errc::kIntegrityFailure, "MAC mismatch on cell " + std::to_string(cell_id)};
  }
  return it->second;
}

Result<SinkVerdict> MemoryStore::check_sink(const PlannedAction& action) const {
  if (!action.critical()) {
    return {Errc::kBadInput, "check_sink applies to critical actions"};
  }
  SinkVerdict verdict;
  for (const auto& [name, cell_id] : action.params) {
    auto cell = read(cell_id);
    if (!cell.ok()) return cell.error();
    if (cell.value().tag == Tag::TAINTED) {
      verdict.clear = false;
      verdict.tainted_cells.push_back(cell_id);
    }
  }
  std::sort(verdict.tainted_cells.begin(), verdict.tainted_cells.end());
  return verdict;
}

Result<std::optional<MemoryCell>> MemoryStore::declassify(uint64_t cell_id,
                                                          approval::ApprovalProvider& approval,
                                                          const TokenId& session,
                                                          const std::string& prompt_id) {
  MemoryCell original;
  {
    auto cell = read(cell_id);
    if (!cell.ok()) return cell.error();
    original = cell.value();
  }
  if (original.tag != Tag::TAINTED) {
    return {Errc::kBadInput, "cell is not tainted"};
  }

  approval::ApprovalRequest req;
  req.prompt_id = prompt_id;
  req.kind = approval::PromptKind::Declassify;
  req.summary = "allow external data (origin " + original.origin + ") into a sensitive action?";
  req.preview = original.content.size() > 120 ? original.content.substr(0, 120) + "..."
                                              : original.content;
  auto choice = approval.decide(req);
  if (!choice.ok() || choice.value() != approval::Choice::Authorize) {
    std::string why = choice.ok() ? "denied" : choice.error().to_string();
    (void)log_.append(session, Digest{}, audit::Event::DECLASSIFY, audit::Severity::WARN,
                      "declassify cell=" + std::to_string(cell_id) + " outcome=" + why);
    return std::optional<MemoryCell>{};
  }

  std::lock_guard lk(mu_);
  MemoryCell fresh = make_cell_locked(original.content, Tag::VERIFIED, "user", {cell_id}, true);
  (void)log_.append(session, Digest{}, audit::Event::DECLASSIFY, audit::Severity::INFO,
                    "declassify cell=" + std::to_string(cell_id) +
                        " outcome=approved new_cell=" + std::to_string(fresh.cell_id));
  return std::optional<MemoryCell>{fresh};
}

size_t MemoryStore::size() const {
  std::lock_guard lk(mu_);
  return cells_.size();
}

std::vector<MemoryCell> MemoryStore::all_cells() const {
  std::lock_guard lk(mu_);
  std::vector<MemoryCell> out;
  out.reserve(cells_.size());
  for (const auto& [_, c] : cells_) out.push_back(c);
  return out;
}

Status MemoryStore::save(const std::string& path) const {
  std::lock_guard lk(mu_);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return Error{Errc::kStoreUnavailable, path};
  out.write("AURAMEM1", 8);
  for (const auto& [_, c] : cells_) {
    CanonicalWriter w;
    w.field_u64(c.cell_id);
    w.field_str(c.content);
    w.field_u8(static_cast<uint8_t>(c.tag));
    w.field_str(c.origin);
    w.field_count(static_cast<uint32_t>(c.derivation.size()));
    for (auto p : c.derivation) w.field_u64(p);
    w.field_u8(c.declassified ? 1 : 0);
    w.field_bytes(c.integrity_mac.data(), 32);
    // frame digest covers every field above, so provenance metadata outside
    // the MAC payload is still tamper-evident at rest
    Digest frame = platform::hash(w.bytes());
    w.field_bytes(frame.data(), 32);
    const auto& b = w.bytes();
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<long>(b.size()));
  }
  out.flush();
  if (!out) return Error{Errc::kStoreUnavailable, path};
  return ok_status();
}

Status MemoryStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return Error{Errc::kStoreUnavailable, path};
  std::string magic(8, '\0');
  in.read(magic.data(), 8);
  if (magic != "AURAMEM1") return Error{Errc::kBadInput, "bad memory store magic"};
  Bytes rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CanonicalReader r(rest);
  std::lock_guard lk(mu_);
  while (!r.done()) {
    MemoryCell c;
    auto id = r.field_u64();
    auto content = r.field_str();
    auto tag = r.field_u8();
    auto origin = r.field_str();
    auto nderiv = r.field_count();
    if (!id || !content || !tag || *tag > 1 || !origin || !nderiv) {
      return Error{Errc::kBadInput, "truncated memory cell"};
    }
    c.cell_id = *id;
    c.content = *content;
    c.tag = static_cast<Tag>(*tag);
    c.origin = *origin;
    for (uint32_t i = 0; i < *nderiv; ++i) {
      auto p = r.field_u64();
      if (!p) return Error{Errc::kBadInput, "truncated derivation list"};
      c.derivation.push_back(*p);
    }
    auto declass = r.field_u8();
    auto mac = r.field_bytes();
    auto frame = r.field_bytes();
    if (!declass || !mac || mac->size() != 32 || !frame || frame->size() != 32) {
      return Error{Errc::kBadInput, "truncated cell frame"};
    }
    c.declassified = *declass != 0;
    std::copy(mac->begin(), mac->end(), c.integrity_mac.begin());

    // re-encode and check the frame digest before trusting any field
    CanonicalWriter w;
    w.field_u64(c.cell_id);
    w.field_str(c.content);
    w.field_u8(static_cast<uint8_t>(c.tag));
    w.field_str(c.origin);
    w.field_count(static_cast<uint32_t>(c.derivation.size()));
    for (auto p : c.derivation) w.field_u64(p);
    w.field_u8(c.declassified ? 1 : 0);
    w.field_bytes(c.integrity_mac.data(), 32);
    Digest expect = platform::hash(w.bytes());
    if (!std::equal(frame->begin(), frame->end(), expect.begin())) {
      return Error{Errc::kIntegrityFailure,
                   "cell " + std::to_string(c.cell_id) + " fails frame verification"};
    }
    if (mac_of(c) != c.integrity_mac) {
      return Error{Errc::kIntegrityFailure,
                   "cell " + std::to_string(c.cell_id) + " fails MAC verification"};
    }
    cells_[c.cell_id] = c;
    next_id_ = std::max(next_id_, c.cell_id + 1);
  }
  return ok_status();
}

AlignmentVerdict check_alignment(const Trajectory& traj, const PlannedAction& candidate,
                                 const MemoryStore& store, const DriftDetector& detector) {
  if (candidate.critical() && candidate.requires_user_visible_justification &&
      candidate.justification.empty()) {
    return {Alignment::MissingJustification,
            "critical action " + candidate.op_name + " carries no justification"};
  }
  if (auto drift = detector(traj, candidate, store)) {
    return {Alignment::Drift, *drift};
  }
  return {Alignment::Consistent, ""};
}

}  // namespace aura::cognition
