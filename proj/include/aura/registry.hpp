#pragma once

#include <mutex>

#include "aura/platform.hpp"
#include "aura/types.hpp"

namespace aura::registry {

enum class AppCategory : uint8_t {
  CALCULATOR,
  CLOCK,
  NOTES,
  MESSAGING,
  BOOKING,
  SOCIAL,
  BROWSER,
  FINANCE,
  SYSTEM_ORCHESTRATOR,
};

std::string_view app_category_name(AppCategory c);
std::optional<AppCategory> app_category_from_name(std::string_view name);

// Permission ceiling per category; the vetting policy. Mirrored in
// docs/formats.md.
const std::set<SemanticPermission>& category_matrix(AppCategory c);

struct DeveloperIdentity {
  std::string dev_id;
  PublicKey dev_pubkey{};
  bool active = true;
};

struct AgentIdentityCard {
  AgentDid did;
  PublicKey agent_pubkey{};
  CapabilityBoundary s_max;
  Signature gar_signature{};
  uint64_t serial = 0;

  bool operator==(const AgentIdentityCard&) const = default;

  // Payload under the GAR signature: did || agent_pubkey || s_max.
  Bytes signed_payload() const;
  // Full canonical form (payload || signature || serial); its hash is the
  // AIC fingerprint used for audit attribution.
  Bytes canonical() const;
  Digest fingerprint() const;
  static std::optional<AgentIdentityCard> decode(const Bytes& raw);
};

// Payload under the developer's manifest signature: did || s_max.
Bytes manifest_payload(const AgentDid& did, const CapabilityBoundary& s_max);

struct RevocationList {
  std::set<uint64_t> revoked_serials;
  Signature list_signature{};
  uint64_t epoch = 0;

  Bytes signed_payload() const;
  bool verify(const PublicKey& gar_root) const;
};

enum class AicVerdict { Valid, InvalidSignature, Revoked };

// valid iff the GAR signature verifies under the pinned root and the serial
// is not revoked. Pure function: relying parties run it locally.
AicVerdict verify_aic(const AgentIdentityCard& aic, const RevocationList& rev,
                      const PublicKey& gar_root);

// The Global Agent Registry: enrollment, vetting, AIC issuance, revocation.
// Single in-process authority; linearizable issuance/revocation.
class Registry {
 public:
  explicit Registry(uint64_t seed);

  PublicKey root_key() const { return root_pub_; }

  Result<DeveloperIdentity> enroll_developer(const std::string& dev_id,
                                             const PublicKey& dev_pubkey);

  Status vet_manifest(AppCategory category, const CapabilityBoundary& s_max) const;

  Result<AgentIdentityCard> issue_aic(const AgentDid& did, const PublicKey& agent_pubkey,
                                      const CapabilityBoundary& s_max, AppCategory category,
                                      const Signature& manifest_sig);

  Result<RevocationList> revoke_aic(uint64_t serial, const std::string& reason);

  RevocationList current_revocations() const;
  std::vector<DeveloperIdentity> developers() const;
  std::vector<AgentIdentityCard> issued() const;
  std::vector<std::pair<uint64_t, std::string>> revocation_log() const;

  // Helper for tests and provisioning flows that hold the developer secret.
  static Signature sign_manifest(const std::array<uint8_t, 64>& dev_secret, const AgentDid& did,
                                 const CapabilityBoundary& s_max);

  // Append-only record file: [u8 kind][canonical payload] frames. load_file
  // replays the frames into this (freshly constructed) registry.
  Status save(const std::string& path) const;
  Status load_file(const std::string& path);

 private:
  Signature root_sign_locked(const Bytes& payload) const;
  RevocationList rebuild_revocation_locked();

  mutable std::mutex mu_;
  std::array<uint8_t, 64> root_secret_{};
  PublicKey root_pub_{};
  std::map<std::string, DeveloperIdentity> developers_;
  std::vector<AgentIdentityCard> issued_;
  std::set<uint64_t> revoked_;
  std::vector<std::pair<uint64_t, std::string>> revocation_log_;
  uint64_t next_serial_ = 1;
  uint64_t epoch_ = 0;
  RevocationList current_rev_;
};

}  // namespace aura::registry
