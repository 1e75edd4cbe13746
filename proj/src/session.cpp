#include "aura/session.hpp"

namespace aura::session {

Kernel::Kernel(platform::Platform& plat, audit::AuditLog& log, PublicKey gar_root,
               std::function<registry::RevocationList()> revocation_source)
    : plat_(plat), log_(log), gar_root_(gar_root), revocation_source_(std::move(revocation_source)) {}

void Kernel::set_mode(KernelMode mode) {
  std::lock_guard lk(mu_);
  mode_ = mode;
}

KernelMode Kernel::mode() const {
  std::lock_guard lk(mu_);
  return mode_;
}

void Kernel::set_system_agent(const AgentDid& did) {
  std::lock_guard lk(mu_);
  sa_did_ = did;
}

bool Kernel::available_locked() const { return plat_.online() && log_.healthy(); }

bool Kernel::available() const {
  std::lock_guard lk(mu_);
  return available_locked();
}

void Kernel::audit_auth(const TokenId& session, const Digest& actor, audit::Severity sev,
                        const std::string& payload) {
  (void)log_.append(session, actor, audit::Event::AUTH, sev, payload);
}

Result<PublicKey> Kernel::provision_agent_key(const AgentDid& did) {
  std::lock_guard lk(mu_);
  if (!available_locked()) return Errc::kKernelUnavailable;
  auto kp = plat_.generate_keypair(ProcessIdentity::kernel());
  if (!kp.ok()) return kp.error();
  agent_keys_[did] = kp.value().first;
  return kp.value().second;
}

Status Kernel::install_aic(const registry::AgentIdentityCard& aic) {
  std::lock_guard lk(mu_);
  if (!available_locked()) return Error{Errc::kKernelUnavailable, {}};
  if (!agent_keys_.count(aic.did)) {
    return Error{Errc::kUnknownHandle, "no provisioned key for " + aic.did.render()};
  }
  installed_aics_[aic.did] = aic;
  aic_serials_[aic.did] = aic.serial;
  return ok_status();
}

std::optional<registry::AgentIdentityCard> Kernel::aic_of(const AgentDid& did) const {
  std::lock_guard lk(mu_);
  auto it = installed_aics_.find(did);
  if (it == installed_aics_.end()) return std::nullopt;
  return it->second;
}

Result<Signature> Kernel::agent_sign(const AgentDid& did, const ProcessIdentity& caller,
                                     const Bytes& msg) {
  std::lock_guard lk(mu_);
  if (!available_locked()) return Errc::kKernelUnavailable;
  auto it = agent_keys_.find(did);
  if (it == agent_keys_.end()) return {Errc::kUnknownHandle, did.render()};
  if (caller.code_fingerprint != did.bundle_fingerprint && mode_ == KernelMode::Enforced) {
    return {Errc::kFingerprintMismatch, "caller is not the bound bundle"};
  }
  return plat_.vault_sign(it->second, ProcessIdentity::kernel(), msg);
}

Bytes Kernel::begin_auth(const ProcessIdentity& proc) {
  std::lock_guard lk(mu_);
  Bytes nonce = plat_.random_bytes(32);
  pending_nonces_[proc] = nonce;
  return nonce;
}

void Kernel::invalidate_principal_locked(const AgentDid& did) {
  for (auto& [id, tok] : tokens_) {
    if (tok.principal == did && tok.status == TokenStatus::Live) {
      tok.status = TokenStatus::Invalidated;
    }
  }
}

Result<SessionToken> Kernel::authenticate_agent(const ProcessIdentity& proc,
                                                const registry::AgentIdentityCard& aic,
                                                const Signature& proof) {
  std::lock_guard lk(mu_);
  if (!available_locked()) return Errc::kKernelUnavailable;

  Digest actor = aic.fingerprint();
  bool enforced = mode_ == KernelMode::Enforced;
  std::optional<Error> failure;

  auto rev = revocation_source_ ? revocation_source_() : registry::RevocationList{};
  switch (registry::verify_aic(aic, rev, gar_root_)) {
    case registry::AicVerdict::Valid:
      break;
    case registry::AicVerdict::InvalidSignature:
      failure = Error{Errc::kInvalidAic, "GAR signature does not verify"};
      break;
    case registry::AicVerdict::Revoked:
      failure = Error{Errc::kRevokedAic, "serial " + std::to_string(aic.serial)};
      break;
  }
  if (!failure && aic.did.bundle_fingerprint != proc.code_fingerprint) {
    failure = Error{Errc::kFingerprintMismatch, aic.did.render()};
  }
  if (!failure) {
    auto nonce = pending_nonces_.find(proc);
    if (nonce == pending_nonces_.end() ||
        !platform::verify_signature(aic.agent_pubkey, nonce->second, proof)) {
      failure = Error{Errc::kProofFailure, "nonce proof does not verify"};
    }
  }
  pending_nonces_.erase(proc);

  if (failure && enforced) {
    audit_auth(TokenId{}, actor, audit::Severity::CRITICAL,
               "block stage=identity reason=" + failure->to_string() +
                   " did=" + aic.did.render());
    return *failure;
  }

  invalidate_principal_locked(aic.did);

  SessionToken tok;
  auto raw = plat_.random_bytes(16);
  std::copy(raw.begin(), raw.end(), tok.token_id.begin());
  tok.principal = aic.did;
  tok.role = (sa_did_ && aic.did == *sa_did_) ? Role::SA : Role::AA;
  tok.bound_process = proc;
  tok.s_max = aic.s_max;
  tok.issued_at = step_;
  tok.status = TokenStatus::Live;
  tokens_[tok.token_id] = tok;

  log_.register_session(tok.token_id);
  log_.register_actor(actor, aic.did.developer + "/" + aic.did.user_account);
  if (failure) {
    audit_auth(tok.token_id, actor, audit::Severity::WARN,
               "passthrough-auth unchecked reason=" + failure->to_string() +
                   " did=" + aic.did.render());
  } else {
    audit_auth(tok.token_id, actor, audit::Severity::INFO,
               std::string("authenticated role=") + (tok.role == Role::SA ? "SA" : "AA") +
                   " did=" + aic.did.render());
  }
  return tok;
}

Result<SessionToken> Kernel::validate_call_locked(const TokenId& token_id,
                                                  const ProcessIdentity& caller) const {
  auto it = tokens_.find(token_id);
  if (it == tokens_.end()) return Errc::kUnknownToken;
  if (it->second.bound_process != caller) {
    return {Errc::kProcessMismatch, "token bound to another process"};
  }
  if (it->second.status != TokenStatus::Live) return Errc::kTokenInvalidated;
  return it->second;
}

Result<SessionToken> Kernel::validate_call(const TokenId& token_id,
                                           const ProcessIdentity& caller) const {
  std::lock_guard lk(mu_);
  if (!available_locked()) return Errc::kKernelUnavailable;
  return validate_call_locked(token_id, caller);
}

Result<SessionToken> Kernel::invoke_agent(const TokenId& sa_token, const AgentDid& target,
                                          const TaskSpec& task, const ProcessIdentity& caller) {
  std::lock_guard lk(mu_);
  if (!available_locked()) return Errc::kKernelUnavailable;
  auto caller_tok = validate_call_locked(sa_token, caller);
  if (!caller_tok.ok()) return caller_tok.error();
  bool enforced = mode_ == KernelMode::Enforced;
  if (caller_tok.value().role != Role::SA && enforced) {
    Digest actor =
        installed_aics_.count(caller_tok.value().principal)
            ? installed_aics_[caller_tok.value().principal].fingerprint()
            : Digest{};
    audit_auth(sa_token, actor, audit::Severity::CRITICAL,
               "block stage=identity reason=NotSystemAgent did=" +
                   caller_tok.value().principal.render());
    return {Errc::kNotSystemAgent, "orchestration requires the SA token"};
  }

  const SessionToken* target_tok = nullptr;
  for (const auto& [id, tok] : tokens_) {
    if (tok.principal == target && tok.status == TokenStatus::Live) {
      target_tok = &tok;
      break;
    }
  }
  if (!target_tok) return {Errc::kTargetUnavailable, target.render()};

  parent_links_[target_tok->token_id] = sa_token;
  Digest actor = installed_aics_.count(target) ? installed_aics_[target].fingerprint() : Digest{};
  audit_auth(target_tok->token_id, actor, audit::Severity::INFO,
             "invoke task=\"" + task.description + "\" parent=" + hex_of(sa_token));
  return *target_tok;
}

Result<Signature> Kernel::kernel_sign(const TokenId& token_id, const ProcessIdentity& caller,
                                      const Bytes& msg) {
  std::lock_guard lk(mu_);
  if (!available_locked()) return Errc::kKernelUnavailable;
  auto tok = validate_call_locked(token_id, caller);
  if (!tok.ok()) return tok.error();
  auto handle = agent_keys_.find(tok.value().principal);
  if (handle == agent_keys_.end()) return {Errc::kUnknownHandle, tok.value().principal.render()};
  return plat_.vault_sign(handle->second, ProcessIdentity::kernel(), msg);
}

void Kernel::on_process_terminated(const ProcessIdentity& proc) {
  std::lock_guard lk(mu_);
  for (auto& [id, tok] : tokens_) {
    if (tok.bound_process == proc && tok.status == TokenStatus::Live) {
      tok.status = TokenStatus::Invalidated;
    }
  }
  pending_nonces_.erase(proc);
}

void Kernel::sweep_revocations() {
  std::lock_guard lk(mu_);
  if (!revocation_source_) return;
  auto rev = revocation_source_();
  if (!rev.verify(gar_root_)) return;
  for (auto& [id, tok] : tokens_) {
    if (tok.status != TokenStatus::Live) continue;
    auto serial = aic_serials_.find(tok.principal);
    if (serial != aic_serials_.end() && rev.revoked_serials.count(serial->second)) {
      tok.status = TokenStatus::Invalidated;
      Digest actor = installed_aics_.count(tok.principal)
                         ? installed_aics_[tok.principal].fingerprint()
                         : Digest{};
      (void)log_.append(id, actor, audit::Event::REVOCATION, audit::Severity::WARN,
                        "session invalidated, AIC serial " + std::to_string(serial->second) +
                            " revoked");
    }
  }
}

std::optional<SessionToken> Kernel::live_token_of(const AgentDid& did) const {
  std::lock_guard lk(mu_);
  for (const auto& [id, tok] : tokens_) {
    if (tok.principal == did && tok.status == TokenStatus::Live) return tok;
  }
  return std::nullopt;
}

std::optional<TokenId> Kernel::parent_session(const TokenId& aa_token) const {
  std::lock_guard lk(mu_);
  auto it = parent_links_.find(aa_token);
  if (it == parent_links_.end()) return std::nullopt;
  return it->second;
}

uint64_t Kernel::step() const {
  std::lock_guard lk(mu_);
  return step_;
}

void Kernel::advance_step() {
  std::lock_guard lk(mu_);
  ++step_;
}

}  // namespace aura::session
