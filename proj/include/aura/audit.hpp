#pragma once

#include <mutex>

#include "aura/platform.hpp"
#include "aura/types.hpp"

namespace aura::audit {

enum class Event : uint8_t {
  USER_INSTRUCTION,
  SA_REASONING,
  AA_RESPONSE,
  SENSITIVE_OP,
  DECISION,
  DECLASSIFY,
  ALERT,
  AUTH,
  REVOCATION,
};

enum class Severity : uint8_t { INFO, WARN, CRITICAL };

std::string_view event_name(Event e);
std::string_view severity_name(Severity s);

// Chain root; fixed for every log instance.
Digest genesis_hash();

// Reserved actor fingerprints: the zero digest is the device user; kernel
// infrastructure events carry kernel_actor().
Digest kernel_actor();

struct AuditRecord {
  uint64_t record_id = 0;
  TokenId session{};  // zero for pre-session events (AUTH, REVOCATION)
  Digest actor{};     // AIC fingerprint; zero = the device user
  Event event = Event::AUTH;
  Severity severity = Severity::INFO;
  Digest payload_digest{};
  Digest prev_hash{};
  Digest this_hash{};

  bool operator==(const AuditRecord&) const = default;

  Bytes hash_preimage() const;
  Digest compute_hash() const;
};

struct ChainVerdict {
  bool intact = true;
  uint64_t broken_at = 0;  // record_id of the first bad link
};

// Recomputes every link: this_hash from the record fields and prev_hash from
// the predecessor (genesis before the first record). Works on any serialized
// record list, independent of the store.
ChainVerdict verify_chain(const std::vector<AuditRecord>& records,
                          const Digest& anchor = genesis_hash());

// Binary Merkle tree over this_hash values in record_id order; odd node count
// duplicates the last node at each level; parent = SHA256(left || right).
Digest merkle_root(const std::vector<Digest>& leaves);

struct ExportDigest {
  Digest merkle_root{};
  uint64_t first_id = 0;
  uint64_t last_id = 0;
  std::set<Digest> aic_fingerprints;
  Signature signature{};

  Bytes signed_payload() const;
  bool verify(const PublicKey& device_key) const;
};

enum class EraseScope : uint8_t { Session, Agent, All };

// Full-lifecycle accountability log. Single serialized appender; a record is
// persisted to the encrypted store before append returns. The clear chain
// index stays verifiable without the payload key.
class AuditLog {
 public:
  // resume=false truncates/creates the store; resume=true replays an existing
  // store into memory (payloads that fail authentication load as erased).
  // store_hint is cleartext key-lookup metadata in the header (the simulator
  // writes the scenario id so the CLI can re-derive the device key from the
  // run seed); it carries no payload data and sits outside the chain.
  AuditLog(platform::Platform& plat, std::optional<std::string> store_path, bool resume = false,
           std::string store_hint = {});

  static Result<std::string> read_store_hint(const std::string& path);

  bool healthy() const;

  void register_session(const TokenId& session);
  void register_actor(const Digest& fingerprint, const std::string& display_name);

  Result<AuditRecord> append(const TokenId& session, const Digest& actor, Event event,
                             Severity severity, const std::string& payload);

  std::vector<AuditRecord> records() const;
  std::optional<std::string> payload_of(uint64_t record_id) const;  // nullopt once erased

  Result<ExportDigest> export_range(uint64_t first_id, uint64_t last_id) const;

  // Ordered, human-readable rendition of one session's records. CRITICAL
  // lines carry a '!' marker. Header-only when the session has no records.
  Result<std::string> summarize(const TokenId& session) const;

  // Destroys matching payloads (memory and store) and appends a device-signed
  // tombstone carrying the Merkle root of the erased records, so the chain
  // and later exports stay verifiable.
  Result<AuditRecord> erase(EraseScope scope, const TokenId& session = {},
                            const Digest& agent = {});

  uint64_t next_record_id() const;

  // Store-level verification: frame parsing, chain links, and payload
  // authentication (AEAD + digest). Any tampering or deletion flags broken.
  static ChainVerdict verify_store(const std::string& path,
                                   const std::array<uint8_t, 32>& at_rest_key);
  static Result<std::vector<AuditRecord>> read_store(const std::string& path);

  std::array<uint8_t, 32> at_rest_key() const { return key_; }

 private:
  struct Entry {
    AuditRecord rec;
    std::optional<std::string> payload;  // cleared by erase
  };

  Status persist_locked();
  Result<AuditRecord> append_locked(const TokenId& session, const Digest& actor, Event event,
                                    Severity severity, const std::string& payload);
  Result<Digest> range_root_locked(uint64_t first_id, uint64_t last_id,
                                   std::set<Digest>* actors) const;

  platform::Platform& plat_;
  std::optional<std::string> store_path_;
  std::string hint_;
  std::array<uint8_t, 32> key_{};
  mutable std::mutex mu_;
  bool healthy_ = true;
  std::vector<Entry> entries_;
  std::set<TokenId> known_sessions_;
  std::map<Digest, std::string> actor_names_;
  Digest tip_;
};

}  // namespace aura::audit
