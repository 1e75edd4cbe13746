#pragma once

#include <functional>

#include "aura/audit.hpp"
#include "aura/platform.hpp"
#include "aura/registry.hpp"

namespace aura::session {

enum class Role : uint8_t { SA, AA };

enum class TokenStatus : uint8_t { Live, Invalidated };

struct SessionToken {
  TokenId token_id{};
  AgentDid principal;
  Role role = Role::AA;
  ProcessIdentity bound_process;
  CapabilityBoundary s_max;
  uint64_t issued_at = 0;
  TokenStatus status = TokenStatus::Live;
};

enum class KernelMode : uint8_t { Enforced, Passthrough };

// Kernel-mediated mutual attestation and the Token-to-Process Map. All agent
// signing goes through here; agents never see key material or other agents'
// tokens' bindings.
//
// Passthrough mode keeps the identity plumbing (tokens, attribution, audit)
// but stops acting on verification failures, reproducing the baseline
// behavior the enforced mode is measured against.
class Kernel {
 public:
  Kernel(platform::Platform& plat, audit::AuditLog& log, PublicKey gar_root,
         std::function<registry::RevocationList()> revocation_source);

  void set_mode(KernelMode mode);
  KernelMode mode() const;

  void set_system_agent(const AgentDid& did);

  bool available() const;

  // Provisioning ("local binding"): the kernel generates the agent keypair in
  // the vault, retains the opaque handle, and maps the DID to it.
  Result<PublicKey> provision_agent_key(const AgentDid& did);
  Status install_aic(const registry::AgentIdentityCard& aic);
  std::optional<registry::AgentIdentityCard> aic_of(const AgentDid& did) const;

  // Pre-session signing under the provisioned AIC key; the caller's process
  // fingerprint must match the DID's bundle fingerprint.
  Result<Signature> agent_sign(const AgentDid& did, const ProcessIdentity& caller,
                               const Bytes& msg);

  Bytes begin_auth(const ProcessIdentity& proc);
  Result<SessionToken> authenticate_agent(const ProcessIdentity& proc,
                                          const registry::AgentIdentityCard& aic,
                                          const Signature& proof);

  Result<SessionToken> validate_call(const TokenId& token_id, const ProcessIdentity& caller) const;

  Result<SessionToken> invoke_agent(const TokenId& sa_token, const AgentDid& target,
                                    const TaskSpec& task, const ProcessIdentity& caller);

  Result<Signature> kernel_sign(const TokenId& token_id, const ProcessIdentity& caller,
                                const Bytes& msg);

  // Process lifecycle: the simulator's process table reports terminations;
  // every token bound to the dead process is invalidated.
  void on_process_terminated(const ProcessIdentity& proc);

  // Pulls the current revocation list and invalidates live sessions whose
  // AIC serial is revoked.
  void sweep_revocations();

  std::optional<SessionToken> live_token_of(const AgentDid& did) const;
  std::optional<TokenId> parent_session(const TokenId& aa_token) const;

  uint64_t step() const;
  void advance_step();

  platform::Platform& platform() { return plat_; }
  audit::AuditLog& log() { return log_; }

 private:
  bool available_locked() const;
  void invalidate_principal_locked(const AgentDid& did);
  Result<SessionToken> validate_call_locked(const TokenId& token_id,
                                            const ProcessIdentity& caller) const;
  void audit_auth(const TokenId& session, const Digest& actor, audit::Severity sev,
                  const std::string& payload);

  platform::Platform& plat_;
  audit::AuditLog& log_;
  PublicKey gar_root_{};
  std::function<registry::RevocationList()> revocation_source_;
  std::optional<AgentDid> sa_did_;

  mutable std::mutex mu_;
  KernelMode mode_ = KernelMode::Enforced;
  uint64_t step_ = 0;
  std::map<AgentDid, platform::KeyHandle> agent_keys_;
  std::map<AgentDid, registry::AgentIdentityCard> installed_aics_;
  std::map<AgentDid, uint64_t> aic_serials_;
  std::map<ProcessIdentity, Bytes> pending_nonces_;
  std::map<TokenId, SessionToken> tokens_;
  std::map<TokenId, TokenId> parent_links_;
};

}  // namespace aura::session
