#pragma once

#include <map>
#include <mutex>
#include <variant>

#include "aura/types.hpp"

namespace aura::platform {

// Fixed measurement chain order.
inline constexpr std::array<std::string_view, 5> kBootStages = {
    "boot-rom", "bootloader", "os-image", "kernel-module", "policy-config"};

Digest hash(const Bytes& data);
Digest hash(std::string_view data);

bool verify_signature(const PublicKey& pk, const Bytes& msg, const Signature& sig);

struct Measurement {
  std::string stage_name;
  Digest digest{};

  bool operator==(const Measurement&) const = default;
};

struct AttestationToken {
  std::vector<Measurement> measurements;
  Digest device_key_fingerprint{};
  Signature signature{};

  Bytes signed_payload(const Bytes& nonce) const;
};

bool verify_attestation(const AttestationToken& token, const Bytes& nonce,
                        const PublicKey& device_key);

// Opaque reference to a vault-held private key. Never carries key material.
struct KeyHandle {
  TokenId handle_id{};
  // "platform" binding is represented by ProcessIdentity::kernel()
  ProcessIdentity owner_binding;

  auto operator<=>(const KeyHandle&) const = default;
};

enum class BootState { NotBooted, Online, FailClosed };

struct BootOutcome {
  BootState state = BootState::NotBooted;
  std::optional<AttestationToken> attestation;  // present iff Online
};

// In-process stand-in for the hardware root of trust. Private keys live only
// inside the handle table; the API surface is the isolation boundary.
class Platform {
 public:
  explicit Platform(uint64_t seed);

  // Measures every stage image against the fused expected digests. Any
  // mismatch latches FailClosed and every later operation returns
  // KernelUnavailable.
  BootOutcome secure_boot(const std::map<std::string, Bytes>& images,
                          const std::map<std::string, Digest>& expected);

  BootState boot_state() const;
  bool online() const { return boot_state() == BootState::Online; }

  Result<std::pair<KeyHandle, PublicKey>> generate_keypair(const ProcessIdentity& owner);
  Result<Signature> vault_sign(const KeyHandle& handle, const ProcessIdentity& caller,
                               const Bytes& msg);
  Result<PublicKey> public_key_of(const KeyHandle& handle) const;

  Result<AttestationToken> issue_attestation(const Bytes& nonce);
  PublicKey device_attestation_key() const;

  // Kernel-internal signing under the device attestation key (audit exports,
  // erasure tombstones).
  Result<Signature> device_sign(const Bytes& msg) const;

  // Device-local symmetric secrets (audit store encryption, memory MACs).
  // Derivation is deterministic per (seed, label).
  std::array<uint8_t, 32> derive_device_secret(std::string_view label) const;

  Bytes random_bytes(size_t n);
  uint64_t random_u64();

 private:
  struct VaultEntry {
    ProcessIdentity owner;
    PublicKey pub{};
    std::array<uint8_t, 64> secret{};  // Ed25519 expanded secret key
  };

  std::vector<Measurement> measurements_;
  AttestationToken make_attestation_locked(const Bytes& nonce);

  mutable std::mutex mu_;
  uint64_t seed_;
  DetRng rng_;
  BootState state_ = BootState::NotBooted;
  std::map<TokenId, VaultEntry> vault_;
  std::array<uint8_t, 64> device_secret_{};
  PublicKey device_pub_{};
};

// Expected-measurement config: one "<stage> <hex-digest>" line per stage,
// '#' comments allowed.
Result<std::map<std::string, Digest>> load_measurement_config(const std::string& path);
std::string render_measurement_config(const std::map<std::string, Digest>& expected);

// Reference stage images for the shipped device profile; --tamper-stage
// perturbs one of these to demo fail-closed boot.
std::map<std::string, Bytes> default_boot_images();
std::map<std::string, Digest> measure_images(const std::map<std::string, Bytes>& images);

}  // namespace aura::platform
