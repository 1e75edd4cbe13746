#include "aura/registry.hpp"

#include <sodium.h>

#include <fstream>

namespace aura::registry {

std::string_view app_category_name(AppCategory c) {
  switch (c) {
    case AppCategory::CALCULATOR: return "CALCULATOR";
    case AppCategory::CLOCK: return "CLOCK";
    case AppCategory::NOTES: return "NOTES";
    case AppCategory::MESSAGING: return "MESSAGING";
    case AppCategory::BOOKING: return "BOOKING";
    case AppCategory::SOCIAL: return "SOCIAL";
    case AppCategory::BROWSER: return "BROWSER";
    case AppCategory::FINANCE: return "FINANCE";
    case AppCategory::SYSTEM_ORCHESTRATOR: return "SYSTEM_ORCHESTRATOR";
  }
  return "UNKNOWN";
}

std::optional<AppCategory> app_category_from_name(std::string_view name) {
  for (uint8_t i = 0; i <= static_cast<uint8_t>(AppCategory::SYSTEM_ORCHESTRATOR); ++i) {
    auto c = static_cast<AppCategory>(i);
    if (app_category_name(c) == name) return c;
  }
  return std::nullopt;
}

const std::set<SemanticPermission>& category_matrix(AppCategory c) {
  using P = SemanticPermission;
  static const std::set<P> kCalculator{};
  static const std::set<P> kClock{P::MODIFY_SETTINGS};
  static const std::set<P> kNotes{P::READ_NOTES, P::WRITE_STORAGE};
  static const std::set<P> kMessaging{P::SEND_MESSAGE, P::READ_CONTACTS};
  static const std::set<P> kBooking{P::NETWORK_EGRESS, P::READ_CALENDAR, P::PAYMENT};
  static const std::set<P> kSocial{P::NETWORK_EGRESS, P::SEND_MESSAGE};
  static const std::set<P> kBrowser{P::NETWORK_EGRESS};
  static const std::set<P> kFinance{P::PAYMENT, P::NETWORK_EGRESS};
  static const std::set<P> kOrchestrator{
      P::READ_CONTACTS, P::ACCESS_FINE_LOCATION, P::RECORD_AUDIO, P::SEND_MESSAGE,
      P::PAYMENT,       P::WRITE_STORAGE,        P::INSTALL_PACKAGES,
      P::MODIFY_SETTINGS, P::NETWORK_EGRESS,     P::READ_NOTES, P::READ_CALENDAR};
  switch (c) {
    case AppCategory::CALCULATOR: return kCalculator;
    case AppCategory::CLOCK: return kClock;
    case AppCategory::NOTES: return kNotes;
    case AppCategory::MESSAGING: return kMessaging;
    case AppCategory::BOOKING: return kBooking;
    case AppCategory::SOCIAL: return kSocial;
    case AppCategory::BROWSER: return kBrowser;
    case AppCategory::FINANCE: return kFinance;
    case AppCategory::SYSTEM_ORCHESTRATOR: return kOrchestrator;
  }
  return kCalculator;
}

Bytes AgentIdentityCard::signed_payload() const {
  CanonicalWriter w;
  w.field_bytes(did.canonical());
  w.field_bytes(agent_pubkey.data(), 32);
  w.field_bytes(s_max.canonical());
  return w.take();
}

Bytes AgentIdentityCard::canonical() const {
  CanonicalWriter w;
  w.field_bytes(signed_payload());
  w.field_bytes(gar_signature.data(), 64);
  w.field_u64(serial);
  return w.take();
}

Digest AgentIdentityCard::fingerprint() const { return platform::hash(canonical()); }

std::optional<AgentIdentityCard> AgentIdentityCard::decode(const Bytes& raw) {
  CanonicalReader r(raw);
  auto payload = r.field_bytes();
  auto sig = r.field_bytes();
  auto serial = r.field_u64();
  if (!payload || !sig || sig->size() != 64 || !serial) return std::nullopt;
  CanonicalReader pr(*payload);
  auto did_b = pr.field_bytes();
  auto pk = pr.field_bytes();
  auto smax_b = pr.field_bytes();
  if (!did_b || !pk || pk->size() != 32 || !smax_b) return std::nullopt;
  CanonicalReader dr(*did_b);
  auto did = AgentDid::decode(dr);
  CanonicalReader sr(*smax_b);
  auto smax = CapabilityBoundary::decode(sr);
  if (!did || !smax) return std::nullopt;
  AgentIdentityCard aic;
  aic.did = *did;
  std::copy(pk->begin(), pk->end(), aic.agent_pubkey.begin());
  aic.s_max = *smax;
  std::copy(sig->begin(), sig->end(), aic.gar_signature.begin());
  aic.serial = *serial;
  return aic;
}

Bytes manifest_payload(const AgentDid& did, const CapabilityBoundary& s_max) {
  CanonicalWriter w;
  w.field_bytes(did.canonical());
  w.field_bytes(s_max.canonical());
  return w.take();
}

Bytes RevocationList::signed_payload() const {
  CanonicalWriter w;
  w.field_u64(epoch);
  w.field_count(static_cast<uint32_t>(revoked_serials.size()));
  for (auto s : revoked_serials) w.field_u64(s);
  return w.take();
}

bool RevocationList::verify(const PublicKey& gar_root) const {
  return platform::verify_signature(gar_root, signed_payload(), list_signature);
}

AicVerdict verify_aic(const AgentIdentityCard& aic, const RevocationList& rev,
                      const PublicKey& gar_root) {
  if (!platform::verify_signature(gar_root, aic.signed_payload(), aic.gar_signature)) {
    return AicVerdict::InvalidSignature;
  }
  if (rev.revoked_serials.count(aic.serial)) return AicVerdict::Revoked;
  return AicVerdict::Valid;
}

Registry::Registry(uint64_t seed) {
  DetRng rng(seed);
  auto root_seed = rng.array<32>();
  crypto_sign_seed_keypair(root_pub_.data(), root_secret_.data(), root_seed.data());
  current_rev_ = rebuild_revocation_locked();
}

Signature Registry::root_sign_locked(const Bytes& payload) const {
  Signature sig{};
  crypto_sign_detached(sig.data(), nullptr, payload.data(), payload.size(), root_secret_.data());
  return sig;
}

RevocationList Registry::rebuild_revocation_locked() {
  RevocationList rl;
  rl.revoked_serials = revoked_;
  rl.epoch = epoch_;
  rl.list_signature = root_sign_locked(rl.signed_payload());
  return rl;
}

Result<DeveloperIdentity> Registry::enroll_developer(const std::string& dev_id,
                                                     const PublicKey& dev_pubkey) {
  std::lock_guard lk(mu_);
  if (developers_.count(dev_id)) return {Errc::kDuplicateDeveloper, dev_id};
  for (const auto& [id, dev] : developers_) {
    if (dev.active && dev.dev_pubkey == dev_pubkey) {
      return {Errc::kDuplicateDeveloper, "key already enrolled by " + id};
    }
  }
  DeveloperIdentity d{dev_id, dev_pubkey, true};
  developers_.emplace(dev_id, d);
  return d;
}

Status Registry::vet_manifest(AppCategory category, const CapabilityBoundary& s_max) const {
  const auto& allowed = category_matrix(category);
  for (auto p : s_max.permissions) {
    if (!allowed.count(p)) {
      return Error{Errc::kPolicyViolation, std::string(app_category_name(category)) +
                                               " may not request " +
                                               std::string(permission_name(p))};
    }
  }
  if (!s_max.well_formed()) {
    return Error{Errc::kPolicyViolation, "allowlist must be nonempty iff NETWORK_EGRESS held"};
  }
  return ok_status();
}

Result<AgentIdentityCard> Registry::issue_aic(const AgentDid& did, const PublicKey& agent_pubkey,
                                              const CapabilityBoundary& s_max,
                                              AppCategory category,
                                              const Signature& manifest_sig) {
  std::lock_guard lk(mu_);
  if (!did.well_formed()) return {Errc::kBadInput, "malformed DID"};
  auto dev = developers_.find(did.developer);
  if (dev == developers_.end() || !dev->second.active) {
    return {Errc::kUnknownDeveloper, did.developer};
  }
  if (!platform::verify_signature(dev->second.dev_pubkey, manifest_payload(did, s_max),
                                  manifest_sig)) {
    return {Errc::kBadManifestSignature, did.render()};
  }
  if (auto vet = vet_manifest(category, s_max); !vet.ok()) return vet.error();

  AgentIdentityCard aic;
  aic.did = did;
  aic.agent_pubkey = agent_pubkey;
  aic.s_max = s_max;
  aic.serial = next_serial_++;
  aic.gar_signature = root_sign_locked(aic.signed_payload());
  issued_.push_back(aic);
  return aic;
}

Result<RevocationList> Registry::revoke_aic(uint64_t serial, const std::string& reason) {
  std::lock_guard lk(mu_);
  bool known = false;
  for (const auto& aic : issued_) {
    if (aic.serial == serial) {
      known = true;
      break;
    }
  }
  if (!known) return {Errc::kUnknownSerial, std::to_string(serial)};
  revoked_.insert(serial);
  revocation_log_.emplace_back(serial, reason);
  ++epoch_;
  current_rev_ = rebuild_revocation_locked();
  return current_rev_;
}

RevocationList Registry::current_revocations() const {
  std::lock_guard lk(mu_);
  return current_rev_;
}

std::vector<DeveloperIdentity> Registry::developers() const {
  std::lock_guard lk(mu_);
  std::vector<DeveloperIdentity> out;
  for (const auto& [_, d] : developers_) out.push_back(d);
  return out;
}

std::vector<AgentIdentityCard> Registry::issued() const {
  std::lock_guard lk(mu_);
  return issued_;
}

std::vector<std::pair<uint64_t, std::string>> Registry::revocation_log() const {
  std::lock_guard lk(mu_);
  return revocation_log_;
}

Signature Registry::sign_manifest(const std::array<uint8_t, 64>& dev_secret, const AgentDid& did,
                                  const CapabilityBoundary& s_max) {
  Bytes payload = manifest_payload(did, s_max);
  Signature sig{};
  crypto_sign_detached(sig.data(), nullptr, payload.data(), payload.size(), dev_secret.data());
  return sig;
}

namespace {
constexpr uint8_t kFrameDeveloper = 1;
constexpr uint8_t kFrameAic = 2;
constexpr uint8_t kFrameRevocation = 3;
constexpr char kFileMagic[] = "AURAREG1";
}  // namespace

Status Registry::save(const std::string& path) const {
  std::lock_guard lk(mu_);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return Error{Errc::kStoreUnavailable, path};
  out.write(kFileMagic, 8);
  auto frame = [&](uint8_t kind, const Bytes& payload) {
    CanonicalWriter w;
    w.field_u8(kind);
    w.field_bytes(payload);
    const auto& b = w.bytes();
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<long>(b.size()));
  };
  for (const auto& [_, d] : developers_) {
    CanonicalWriter w;
    w.field_str(d.dev_id);
    w.field_bytes(d.dev_pubkey.data(), 32);
    w.field_u8(d.active ? 1 : 0);
    frame(kFrameDeveloper, w.take());
  }
  for (const auto& aic : issued_) frame(kFrameAic, aic.canonical());
  for (const auto& [serial, reason] : revocation_log_) {
    CanonicalWriter w;
    w.field_u64(serial);
    w.field_str(reason);
    frame(kFrameRevocation, w.take());
  }
  out.flush();
  if (!out) return Error{Errc::kStoreUnavailable, path};
  return ok_status();
}

Status Registry::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return Error{Errc::kStoreUnavailable, path};
  std::string magic(8, '\0');
  in.read(magic.data(), 8);
  if (magic != kFileMagic) return Error{Errc::kBadInput, "bad registry file magic"};
  Bytes rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::lock_guard lk(mu_);
  CanonicalReader r(rest);
  while (!r.done()) {
    auto kind = r.field_u8();
    auto payload = r.field_bytes();
    if (!kind || !payload) return Error{Errc::kBadInput, "truncated registry frame"};
    CanonicalReader pr(*payload);
    switch (*kind) {
      case kFrameDeveloper: {
        auto id = pr.field_str();
        auto pk = pr.field_bytes();
        auto active = pr.field_u8();
        if (!id || !pk || pk->size() != 32 || !active) {
          return Error{Errc::kBadInput, "bad dev frame"};
        }
        DeveloperIdentity d;
        d.dev_id = *id;
        std::copy(pk->begin(), pk->end(), d.dev_pubkey.begin());
        d.active = *active != 0;
        developers_[d.dev_id] = d;
        break;
      }
      case kFrameAic: {
        auto aic = AgentIdentityCard::decode(*payload);
        if (!aic) return Error{Errc::kBadInput, "bad AIC frame"};
        issued_.push_back(*aic);
        next_serial_ = std::max(next_serial_, aic->serial + 1);
        break;
      }
      case kFrameRevocation: {
        auto serial = pr.field_u64();
        auto reason = pr.field_str();
        if (!serial || !reason) return Error{Errc::kBadInput, "bad revocation frame"};
        revoked_.insert(*serial);
        revocation_log_.emplace_back(*serial, *reason);
        ++epoch_;
        break;
      }
      default:
        return Error{Errc::kBadInput, "unknown registry frame kind"};
    }
  }
  current_rev_ = rebuild_revocation_locked();
  return ok_status();
}

}  // namespace aura::registry
