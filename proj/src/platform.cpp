#include "aura/platform.hpp"

#include <sodium.h>

#include <fstream>
#include <sstream>

namespace aura::platform {

namespace {

struct SodiumInit {
  SodiumInit() {
    if (sodium_init() < 0) std::abort();
  }
};
const SodiumInit g_sodium_init;

}  // namespace

Digest hash(const Bytes& data) {
  Digest d{};
  crypto_hash_sha256(d.data(), data.data(), data.size());
  return d;
}

Digest hash(std::string_view data) {
  Digest d{};
  crypto_hash_sha256(d.data(), reinterpret_cast<const unsigned char*>(data.data()), data.size());
  return d;
}

bool verify_signature(const PublicKey& pk, const Bytes& msg, const Signature& sig) {
  return crypto_sign_verify_detached(sig.data(), msg.data(), msg.size(), pk.data()) == 0;
}

Bytes AttestationToken::signed_payload(const Bytes& nonce) const {
  CanonicalWriter w;
  w.field_count(static_cast<uint32_t>(measurements.size()));
  for (const auto& m : measurements) {
    w.field_str(m.stage_name);
    w.field_bytes(m.digest.data(), 32);
  }
  w.field_bytes(device_key_fingerprint.data(), 32);
  w.field_bytes(nonce);
  return w.take();
}

bool verify_attestation(const AttestationToken& token, const Bytes& nonce,
                        const PublicKey& device_key) {
  return verify_signature(device_key, token.signed_payload(nonce), token.signature);
}

Platform::Platform(uint64_t seed) : seed_(seed), rng_(seed) {
  auto dev_seed = rng_.array<32>();
  crypto_sign_seed_keypair(device_pub_.data(), device_secret_.data(), dev_seed.data());
}

BootOutcome Platform::secure_boot(const std::map<std::string, Bytes>& images,
                                  const std::map<std::string, Digest>& expected) {
  std::lock_guard lk(mu_);
  measurements_.clear();
  bool good = true;
  for (auto stage : kBootStages) {
    std::string name{stage};
    auto img = images.find(name);
    auto want = expected.find(name);
    if (img == images.end() || want == expected.end()) {
      good = false;
      break;
    }
    Digest got = hash(img->second);
    measurements_.push_back(Measurement{name, got});
    if (got != want->second) {
      good = false;
      break;
    }
  }
  if (!good) {
    state_ = BootState::FailClosed;
    vault_.clear();
    return BootOutcome{BootState::FailClosed, std::nullopt};
  }
  state_ = BootState::Online;
  // Boot-time attestation carries an empty nonce; fresh tokens come from
  // issue_attestation.
  return BootOutcome{BootState::Online, make_attestation_locked({})};
}

BootState Platform::boot_state() const {
  std::lock_guard lk(mu_);
  return state_;
}

Result<std::pair<KeyHandle, PublicKey>> Platform::generate_keypair(const ProcessIdentity& owner) {
  std::lock_guard lk(mu_);
  if (state_ != BootState::Online) return Errc::kKernelUnavailable;
  VaultEntry e;
  e.owner = owner;
  auto seed = rng_.array<32>();
  crypto_sign_seed_keypair(e.pub.data(), e.secret.data(), seed.data());
  TokenId id{};
  do {
    id = rng_.array<16>();
  } while (vault_.count(id));
  vault_.emplace(id, e);
  return std::make_pair(KeyHandle{id, owner}, e.pub);
}

Result<Signature> Platform::vault_sign(const KeyHandle& handle, const ProcessIdentity& caller,
                                       const Bytes& msg) {
  std::lock_guard lk(mu_);
  if (state_ != BootState::Online) return Errc::kKernelUnavailable;
  auto it = vault_.find(handle.handle_id);
  if (it == vault_.end()) return Errc::kUnknownHandle;
  // Kernel-context callers may exercise platform-bound keys; everything else
  // must match the owner binding exactly.
  if (caller != it->second.owner && !(caller.is_kernel() && it->second.owner.is_kernel())) {
    return {Errc::kCallerMismatch, "handle bound to another process"};
  }
  Signature sig{};
  crypto_sign_detached(sig.data(), nullptr, msg.data(), msg.size(), it->second.secret.data());
  return sig;
}

Result<PublicKey> Platform::public_key_of(const KeyHandle& handle) const {
  std::lock_guard lk(mu_);
  auto it = vault_.find(handle.handle_id);
  if (it == vault_.end()) return Errc::kUnknownHandle;
  return it->second.pub;
}

AttestationToken Platform::make_attestation_locked(const Bytes& nonce) {
  AttestationToken t;
  t.measurements = measurements_;
  t.device_key_fingerprint = hash(Bytes(device_pub_.begin(), device_pub_.end()));
  Bytes payload = t.signed_payload(nonce);
  crypto_sign_detached(t.signature.data(), nullptr, payload.data(), payload.size(),
                       device_secret_.data());
  return t;
}

Result<AttestationToken> Platform::issue_attestation(const Bytes& nonce) {
  std::lock_guard lk(mu_);
  if (state_ != BootState::Online) return Errc::kKernelUnavailable;
  return make_attestation_locked(nonce);
}

PublicKey Platform::device_attestation_key() const {
  std::lock_guard lk(mu_);
  return device_pub_;
}

Result<Signature> Platform::device_sign(const Bytes& msg) const {
  std::lock_guard lk(mu_);
  if (state_ != BootState::Online) return Errc::kKernelUnavailable;
  Signature sig{};
  crypto_sign_detached(sig.data(), nullptr, msg.data(), msg.size(), device_secret_.data());
  return sig;
}

std::array<uint8_t, 32> Platform::derive_device_secret(std::string_view label) const {
  CanonicalWriter w;
  w.field_u64(seed_);
  w.field_str("device-secret");
  w.field_str(label);
  return hash(w.take());
}

Bytes Platform::random_bytes(size_t n) {
  std::lock_guard lk(mu_);
  return rng_.bytes(n);
}

uint64_t Platform::random_u64() {
  std::lock_guard lk(mu_);
  return rng_.u64();
}

Result<std::map<std::string, Digest>> load_measurement_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) return {Errc::kBadInput, "cannot open " + path};
  std::map<std::string, Digest> out;
  std::string line;
  while (std::getline(in, line)) {
    auto h = line.find('#');
    if (h != std::string::npos) line.resize(h);
    std::istringstream ls(line);
    std::string stage, hexdig;
    if (!(ls >> stage >> hexdig)) continue;
    auto raw = hex_decode(hexdig);
    if (!raw || raw->size() != 32) return {Errc::kBadInput, "bad digest for stage " + stage};
    Digest d{};
    std::copy(raw->begin(), raw->end(), d.begin());
    out[stage] = d;
  }
  return out;
}

std::string render_measurement_config(const std::map<std::string, Digest>& expected) {
  std::string out = "# stage_name  sha256(image)\n";
  for (auto stage : kBootStages) {
    auto it = expected.find(std::string{stage});
    if (it == expected.end()) continue;
    out += it->first;
    out += "  ";
    out += hex_encode(it->second.data(), 32);
    out += "\n";
  }
  return out;
}

std::map<std::string, Bytes> default_boot_images() {
  std::map<std::string, Bytes> images;
  for (auto stage : kBootStages) {
    images[std::string{stage}] = to_bytes("image:" + std::string{stage} + ":v1");
  }
  return images;
}

std::map<std::string, Digest> measure_images(const std::map<std::string, Bytes>& images) {
  std::map<std::string, Digest> out;
  for (const auto& [stage, img] : images) out[stage] = hash(img);
  return out;
}

}  // namespace aura::platform
