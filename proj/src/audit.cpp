#include "aura/audit.hpp"

#include <sodium.h>

#include <fstream>
#include <sstream>

namespace aura::audit {

namespace {

constexpr char kStoreMagic[] = "AURAAUD1";

std::array<uint8_t, 24> nonce_for(uint64_t record_id) {
  CanonicalWriter w;
  w.field_str("audit-nonce");
  w.field_u64(record_id);
  Digest d = platform::hash(w.bytes());
  std::array<uint8_t, 24> n{};
  std::copy_n(d.begin(), 24, n.begin());
  return n;
}

Bytes encrypt_payload(const std::array<uint8_t, 32>& key, uint64_t record_id,
                      const std::string& payload) {
  Bytes ct(payload.size() + crypto_aead_xchacha20poly1305_ietf_ABYTES);
  unsigned long long ct_len = 0;
  auto nonce = nonce_for(record_id);
  crypto_aead_xchacha20poly1305_ietf_encrypt(
      ct.data(), &ct_len, reinterpret_cast<const unsigned char*>(payload.data()), payload.size(),
      nullptr, 0, nullptr, nonce.data(), key.data());
  ct.resize(ct_len);
  return ct;
}

std::optional<std::string> decrypt_payload(const std::array<uint8_t, 32>& key, uint64_t record_id,
                                           const Bytes& ct) {
  if (ct.size() < crypto_aead_xchacha20poly1305_ietf_ABYTES) return std::nullopt;
  std::string pt(ct.size() - crypto_aead_xchacha20poly1305_ietf_ABYTES, '\0');
  unsigned long long pt_len = 0;
  auto nonce = nonce_for(record_id);
  if (crypto_aead_xchacha20poly1305_ietf_decrypt(
          reinterpret_cast<unsigned char*>(pt.data()), &pt_len, nullptr, ct.data(), ct.size(),
          nullptr, 0, nonce.data(), key.data()) != 0) {
    return std::nullopt;
  }
  pt.resize(pt_len);
  return pt;
}

void write_frame(CanonicalWriter& w, const AuditRecord& rec, bool payload_present,
                 const Bytes& ciphertext) {
  w.field_u64(rec.record_id);
  w.field_bytes(rec.session.data(), rec.session.size());
  w.field_bytes(rec.actor.data(), rec.actor.size());
  w.field_u8(static_cast<uint8_t>(rec.event));
  w.field_u8(static_cast<uint8_t>(rec.severity));
  w.field_bytes(rec.payload_digest.data(), 32);
  w.field_bytes(rec.prev_hash.data(), 32);
  w.field_bytes(rec.this_hash.data(), 32);
  w.field_u8(payload_present ? 1 : 0);
  w.field_bytes(ciphertext);
}

struct Frame {
  AuditRecord rec;
  bool payload_present = false;
  Bytes ciphertext;
};

std::optional<Frame> read_frame(CanonicalReader& r) {
  Frame f;
  auto id = r.field_u64();
  auto session = r.field_bytes();
  auto actor = r.field_bytes();
  auto event = r.field_u8();
  auto severity = r.field_u8();
  auto pdigest = r.field_bytes();
  auto prev = r.field_bytes();
  auto self = r.field_bytes();
  auto present = r.field_u8();
  auto ct = r.field_bytes();
  if (!id || !session || session->size() != 16 || !actor || actor->size() != 32 || !event ||
      *event > static_cast<uint8_t>(Event::REVOCATION) || !severity ||
      *severity > static_cast<uint8_t>(Severity::CRITICAL) || !pdigest || pdigest->size() != 32 ||
      !prev || prev->size() != 32 || !self || self->size() != 32 || !present || *present > 1 ||
      !ct) {
    return std::nullopt;
  }
  f.rec.record_id = *id;
  std::copy(session->begin(), session->end(), f.rec.session.begin());
  std::copy(actor->begin(), actor->end(), f.rec.actor.begin());
  f.rec.event = static_cast<Event>(*event);
  f.rec.severity = static_cast<Severity>(*severity);
  std::copy(pdigest->begin(), pdigest->end(), f.rec.payload_digest.begin());
  std::copy(prev->begin(), prev->end(), f.rec.prev_hash.begin());
  std::copy(self->begin(), self->end(), f.rec.this_hash.begin());
  f.payload_present = *present != 0;
  f.ciphertext = *ct;
  return f;
}

}  // namespace

std::string_view event_name(Event e) {
  switch (e) {
    case Event::USER_INSTRUCTION: return "USER_INSTRUCTION";
    case Event::SA_REASONING: return "SA_REASONING";
    case Event::AA_RESPONSE: return "AA_RESPONSE";
    case Event::SENSITIVE_OP: return "SENSITIVE_OP";
    case Event::DECISION: return "DECISION";
    case Event::DECLASSIFY: return "DECLASSIFY";
    case Event::ALERT: return "ALERT";
    case Event::AUTH: return "AUTH";
    case Event::REVOCATION: return "REVOCATION";
  }
  return "UNKNOWN";
}

std::string_view severity_name(Severity s) {
  switch (s) {
    case Severity::INFO: return "INFO";
    case Severity::WARN: return "WARN";
    case Severity::CRITICAL: return "CRITICAL";
  }
  return "UNKNOWN";
}

Digest genesis_hash() {
  static const Digest g = platform::hash(std::string_view{"aura-audit-genesis-v1"});
  return g;
}

Digest kernel_actor() {
  static const Digest k = platform::hash(std::string_view{"aura-kernel-actor"});
  return k;
}

Bytes AuditRecord::hash_preimage() const {
  CanonicalWriter w;
  w.field_u64(record_id);
  w.field_bytes(session.data(), session.size());
  w.field_bytes(actor.data(), actor.size());
  w.field_u8(static_cast<uint8_t>(event));
  w.field_u8(static_cast<uint8_t>(severity));
  w.field_bytes(payload_digest.data(), 32);
  w.field_bytes(prev_hash.data(), 32);
  return w.take();
}

Digest AuditRecord::compute_hash() const { return platform::hash(hash_preimage()); }

ChainVerdict verify_chain(const std::vector<AuditRecord>& records, const Digest& anchor) {
  Digest prev = anchor;
  uint64_t expected_id = records.empty() ? 0 : records.front().record_id;
  for (const auto& rec : records) {
    if (rec.record_id != expected_id || rec.prev_hash != prev ||
        rec.this_hash != rec.compute_hash()) {
      return ChainVerdict{false, rec.record_id};
    }
    prev = rec.this_hash;
    ++expected_id;
  }
  return ChainVerdict{true, 0};
}

Digest merkle_root(const std::vector<Digest>& leaves) {
  if (leaves.empty()) return genesis_hash();
  std::vector<Digest> level = leaves;
  while (level.size() > 1) {
    if (level.size() % 2 == 1) level.push_back(level.back());
    std::vector<Digest> next;
    next.reserve(level.size() / 2);
    for (size_t i = 0; i < level.size(); i += 2) {
      Bytes pair;
      pair.insert(pair.end(), level[i].begin(), level[i].end());
      pair.insert(pair.end(), level[i + 1].begin(), level[i + 1].end());
      next.push_back(platform::hash(pair));
    }
    level = std::move(next);
  }
  return level.front();
}

Bytes ExportDigest::signed_payload() const {
  CanonicalWriter w;
  w.field_bytes(merkle_root.data(), 32);
  w.field_u64(first_id);
  w.field_u64(last_id);
  w.field_count(static_cast<uint32_t>(aic_fingerprints.size()));
  for (const auto& fp : aic_fingerprints) w.field_bytes(fp.data(), 32);
  return w.take();
}

bool ExportDigest::verify(const PublicKey& device_key) const {
  return platform::verify_signature(device_key, signed_payload(), signature);
}

AuditLog::AuditLog(platform::Platform& plat, std::optional<std::string> store_path, bool resume,
                   std::string store_hint)
    : plat_(plat), store_path_(std::move(store_path)), hint_(std::move(store_hint)) {
  key_ = plat_.derive_device_secret("audit-at-rest");
  tip_ = genesis_hash();
  // Zero session = kernel context; reserved actors for the user and kernel.
  known_sessions_.insert(TokenId{});
  actor_names_[Digest{}] = "user";
  actor_names_[kernel_actor()] = "kernel";
  if (!store_path_) return;

  if (resume) {
    std::ifstream in(*store_path_, std::ios::binary);
    std::string magic(8, '\0');
    in.read(magic.data(), 8);
    if (!in || magic != kStoreMagic) {
      healthy_ = false;
      return;
    }
    Bytes rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CanonicalReader r(rest);
    auto hint = r.field_str();
    if (!hint) {
      healthy_ = false;
      return;
    }
    hint_ = *hint;
    while (!r.done()) {
      auto f = read_frame(r);
      if (!f) {
        healthy_ = false;
        return;
      }
      Entry e;
      e.rec = f->rec;
      if (f->payload_present) e.payload = decrypt_payload(key_, f->rec.record_id, f->ciphertext);
      known_sessions_.insert(f->rec.session);
      entries_.push_back(std::move(e));
      tip_ = f->rec.this_hash;
    }
    return;
  }

  std::ofstream out(*store_path_, std::ios::binary | std::ios::trunc);
  if (!out) {
    healthy_ = false;
  } else {
    out.write(kStoreMagic, 8);
    CanonicalWriter w;
    w.field_str(hint_);
    const auto& b = w.bytes();
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<long>(b.size()));
    healthy_ = static_cast<bool>(out);
  }
}

Result<std::string> AuditLog::read_store_hint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {Errc::kStoreUnavailable, path};
  std::string magic(8, '\0');
  in.read(magic.data(), 8);
  if (magic != kStoreMagic) return {Errc::kBadInput, "bad audit store magic"};
  Bytes rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CanonicalReader r(rest);
  auto hint = r.field_str();
  if (!hint) return {Errc::kBadInput, "missing store hint"};
  return *hint;
}

bool AuditLog::healthy() const {
  std::lock_guard lk(mu_);
  return healthy_;
}

void AuditLog::register_session(const TokenId& session) {
  std::lock_guard lk(mu_);
  known_sessions_.insert(session);
}

void AuditLog::register_actor(const Digest& fingerprint, const std::string& display_name) {
  std::lock_guard lk(mu_);
  actor_names_[fingerprint] = display_name;
}

Result<AuditRecord> AuditLog::append_locked(const TokenId& session, const Digest& actor,
                                            Event event, Severity severity,
                                            const std::string& payload) {
  if (!healthy_) return {Errc::kStoreUnavailable, "audit store failed"};
  if (event != Event::AUTH && event != Event::REVOCATION && !known_sessions_.count(session)) {
    return {Errc::kUnknownSession, "append requires a registered session"};
  }
  AuditRecord rec;
  rec.record_id = entries_.empty() ? 0 : entries_.back().rec.record_id + 1;
  rec.session = session;
  rec.actor = actor;
  rec.event = event;
  // Sensitive-operation records are CRITICAL by construction.
  rec.severity = event == Event::SENSITIVE_OP ? Severity::CRITICAL : severity;
  rec.payload_digest = platform::hash(payload);
  rec.prev_hash = tip_;
  rec.this_hash = rec.compute_hash();

  entries_.push_back(Entry{rec, payload});
  tip_ = rec.this_hash;

  if (store_path_) {
    // Write-ahead contract: the frame reaches the store before control
    // returns to the caller.
    std::ofstream out(*store_path_, std::ios::binary | std::ios::app);
    if (!out) {
      healthy_ = false;
      return {Errc::kStoreUnavailable, *store_path_};
    }
    CanonicalWriter w;
    write_frame(w, rec, true, encrypt_payload(key_, rec.record_id, payload));
    const auto& b = w.bytes();
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<long>(b.size()));
    out.flush();
    if (!out) {
      healthy_ = false;
      return {Errc::kStoreUnavailable, *store_path_};
    }
  }
  return rec;
}

Result<AuditRecord> AuditLog::append(const TokenId& session, const Digest& actor, Event event,
                                     Severity severity, const std::string& payload) {
  std::lock_guard lk(mu_);
  return append_locked(session, actor, event, severity, payload);
}

std::vector<AuditRecord> AuditLog::records() const {
  std::lock_guard lk(mu_);
  std::vector<AuditRecord> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.rec);
  return out;
}

std::optional<std::string> AuditLog::payload_of(uint64_t record_id) const {
  std::lock_guard lk(mu_);
  for (const auto& e : entries_) {
    if (e.rec.record_id == record_id) return e.payload;
  }
  return std::nullopt;
}

Result<Digest> AuditLog::range_root_locked(uint64_t first_id, uint64_t last_id,
                                           std::set<Digest>* actors) const {
  std::vector<AuditRecord> range;
  for (const auto& e : entries_) {
    if (e.rec.record_id >= first_id && e.rec.record_id <= last_id) {
      range.push_back(e.rec);
      if (actors) actors->insert(e.rec.actor);
    }
  }
  if (range.empty()) return {Errc::kBadInput, "empty export range"};
  Digest anchor = range.front().record_id == 0 ? genesis_hash() : range.front().prev_hash;
  auto verdict = verify_chain(range, anchor);
  if (!verdict.intact) {
    return {Errc::kBrokenChain, "broken at " + std::to_string(verdict.broken_at)};
  }
  std::vector<Digest> leaves;
  leaves.reserve(range.size());
  for (const auto& r : range) leaves.push_back(r.this_hash);
  return merkle_root(leaves);
}

Result<ExportDigest> AuditLog::export_range(uint64_t first_id, uint64_t last_id) const {
  std::lock_guard lk(mu_);
  ExportDigest ex;
  auto root = range_root_locked(first_id, last_id, &ex.aic_fingerprints);
  if (!root.ok()) return root.error();
  ex.merkle_root = root.value();
  ex.first_id = first_id;
  ex.last_id = last_id;
  auto sig = plat_.device_sign(ex.signed_payload());
  if (!sig.ok()) return sig.error();
  ex.signature = sig.value();
  return ex;
}

Result<std::string> AuditLog::summarize(const TokenId& session) const {
  std::lock_guard lk(mu_);
  if (!known_sessions_.count(session)) return {Errc::kUnknownSession, hex_of(session)};
  std::ostringstream out;
  out << "session " << hex_of(session) << "\n";
  for (const auto& e : entries_) {
    if (e.rec.session != session) continue;
    if (!e.payload) continue;  // erased content stays out of the report
    auto name_it = actor_names_.find(e.rec.actor);
    std::string actor = name_it != actor_names_.end() ? name_it->second
                                                      : hex_encode(e.rec.actor.data(), 8);
    out << "#" << e.rec.record_id << " " << (e.rec.severity == Severity::CRITICAL ? "! " : "  ")
        << actor << " " << event_name(e.rec.event) << " [" << severity_name(e.rec.severity)
        << "] " << *e.payload << "\n";
  }
  return out.str();
}

Result<AuditRecord> AuditLog::erase(EraseScope scope, const TokenId& session,
                                    const Digest& agent) {
  std::lock_guard lk(mu_);
  std::vector<Digest> erased_leaves;
  uint64_t first = UINT64_MAX, last = 0;
  for (auto& e : entries_) {
    bool match = scope == EraseScope::All ||
                 (scope == EraseScope::Session && e.rec.session == session) ||
                 (scope == EraseScope::Agent && e.rec.actor == agent);
    if (!match || !e.payload) continue;
    e.payload.reset();
    erased_leaves.push_back(e.rec.this_hash);
    first = std::min(first, e.rec.record_id);
    last = std::max(last, e.rec.record_id);
  }
  if (erased_leaves.empty()) {
    first = 0;
    last = 0;
  }
  Digest root = merkle_root(erased_leaves);

  std::string scope_name = scope == EraseScope::Session ? "session"
                           : scope == EraseScope::Agent ? "agent"
                                                        : "all";
  CanonicalWriter tw;
  tw.field_str(scope_name);
  tw.field_u64(first);
  tw.field_u64(last);
  tw.field_bytes(root.data(), 32);
  auto sig = plat_.device_sign(tw.bytes());
  if (!sig.ok()) return sig.error();

  std::string payload = "tombstone scope=" + scope_name + " range=" + std::to_string(first) +
                        "-" + std::to_string(last) + " root=" + hex_of(root) +
                        " sig=" + hex_encode(sig.value().data(), 16);
  TokenId tomb_session = scope == EraseScope::Session ? session : TokenId{};
  auto rec = append_locked(tomb_session, Digest{}, Event::REVOCATION, Severity::WARN, payload);
  if (!rec.ok()) return rec;

  if (store_path_) {
    // Rewrite the store so destroyed payload ciphertext does not linger.
    auto st = persist_locked();
    if (!st.ok()) return st.error();
  }
  return rec;
}

Status AuditLog::persist_locked() {
  if (!store_path_) return ok_status();
  std::ofstream out(*store_path_, std::ios::binary | std::ios::trunc);
  if (!out) {
    healthy_ = false;
    return Error{Errc::kStoreUnavailable, *store_path_};
  }
  out.write(kStoreMagic, 8);
  {
    CanonicalWriter w;
    w.field_str(hint_);
    const auto& b = w.bytes();
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<long>(b.size()));
  }
  for (const auto& e : entries_) {
    CanonicalWriter w;
    Bytes ct = e.payload ? encrypt_payload(key_, e.rec.record_id, *e.payload) : Bytes{};
    write_frame(w, e.rec, e.payload.has_value(), ct);
    const auto& b = w.bytes();
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<long>(b.size()));
  }
  out.flush();
  if (!out) {
    healthy_ = false;
    return Error{Errc::kStoreUnavailable, *store_path_};
  }
  return ok_status();
}

uint64_t AuditLog::next_record_id() const {
  std::lock_guard lk(mu_);
  return entries_.empty() ? 0 : entries_.back().rec.record_id + 1;
}

ChainVerdict AuditLog::verify_store(const std::string& path,
                                    const std::array<uint8_t, 32>& at_rest_key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return ChainVerdict{false, 0};
  std::string magic(8, '\0');
  in.read(magic.data(), 8);
  if (magic != kStoreMagic) return ChainVerdict{false, 0};
  Bytes rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CanonicalReader r(rest);
  if (!r.field_str()) return ChainVerdict{false, 0};
  std::vector<AuditRecord> recs;
  Digest prev = genesis_hash();
  uint64_t expected_id = 0;
  while (!r.done()) {
    auto f = read_frame(r);
    if (!f) return ChainVerdict{false, expected_id};
    const auto& rec = f->rec;
    if (rec.record_id != expected_id || rec.prev_hash != prev ||
        rec.this_hash != rec.compute_hash()) {
      return ChainVerdict{false, rec.record_id};
    }
    if (f->payload_present) {
      auto pt = decrypt_payload(at_rest_key, rec.record_id, f->ciphertext);
      if (!pt || platform::hash(*pt) != rec.payload_digest) {
        return ChainVerdict{false, rec.record_id};
      }
    } else if (!f->ciphertext.empty()) {
      // erased frames carry no ciphertext; anything else is a doctored flag
      return ChainVerdict{false, rec.record_id};
    }
    prev = rec.this_hash;
    ++expected_id;
  }
  return ChainVerdict{true, 0};
}

Result<std::vector<AuditRecord>> AuditLog::read_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {Errc::kStoreUnavailable, path};
  std::string magic(8, '\0');
  in.read(magic.data(), 8);
  if (magic != kStoreMagic) return {Errc::kBadInput, "bad audit store magic"};
  Bytes rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CanonicalReader r(rest);
  if (!r.field_str()) return {Errc::kBadInput, "missing store hint"};
  std::vector<AuditRecord> recs;
  while (!r.done()) {
    auto f = read_frame(r);
    if (!f) return {Errc::kBadInput, "truncated audit frame"};
    recs.push_back(f->rec);
  }
  return recs;
}

}  // namespace aura::audit
