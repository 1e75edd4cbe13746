#pragma once

#include <array>
#include <compare>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>

#include "aura/common.hpp"

namespace aura {

using Digest = std::array<uint8_t, 32>;
using PublicKey = std::array<uint8_t, 32>;
using Signature = std::array<uint8_t, 64>;
using TokenId = std::array<uint8_t, 16>;

inline Bytes to_bytes(const Digest& d) { return Bytes(d.begin(), d.end()); }

template <size_t N>
std::string hex_of(const std::array<uint8_t, N>& a) {
  return hex_encode(a.data(), N);
}

// Deterministic byte stream for all simulated randomness (key seeds, handles,
// token ids, nonces). One seed reproduces a whole run bit-for-bit.
class DetRng {
 public:
  explicit DetRng(uint64_t seed) : eng_(seed) {}

  void fill(uint8_t* out, size_t len) {
    size_t i = 0;
    while (i < len) {
      uint64_t w = eng_();
      for (int b = 0; b < 8 && i < len; ++b, ++i) out[i] = static_cast<uint8_t>(w >> (8 * b));
    }
  }
  Bytes bytes(size_t len) {
    Bytes b(len);
    fill(b.data(), len);
    return b;
  }
  template <size_t N>
  std::array<uint8_t, N> array() {
    std::array<uint8_t, N> a{};
    fill(a.data(), N);
    return a;
  }
  uint64_t u64() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

// Caller identity as reported by the simulated OS process table. Agents never
// self-report this; the kernel reads it from the table on every API call.
struct ProcessIdentity {
  int32_t pid = 0;
  int32_t uid = 0;
  Digest code_fingerprint{};

  auto operator<=>(const ProcessIdentity&) const = default;

  static ProcessIdentity kernel() { return ProcessIdentity{}; }
  bool is_kernel() const { return *this == kernel(); }
};

enum class SemanticPermission : uint8_t {
  READ_CONTACTS,
  ACCESS_FINE_LOCATION,
  RECORD_AUDIO,
  SEND_MESSAGE,
  PAYMENT,
  WRITE_STORAGE,
  INSTALL_PACKAGES,
  MODIFY_SETTINGS,
  NETWORK_EGRESS,
  READ_NOTES,
  READ_CALENDAR,
};

std::string_view permission_name(SemanticPermission p);
std::optional<SemanticPermission> permission_from_name(std::string_view name);

enum class CriticalNodeCategory : uint8_t {
  FINANCIAL,
  DATA_PERSISTENCE,
  PRIVACY_ACCESS,
  SYSTEM_INTEGRITY,
  NETWORK_EGRESS,
};

std::string_view category_name(CriticalNodeCategory c);
std::optional<CriticalNodeCategory> category_from_name(std::string_view name);

// Static ceiling of permissions and egress domains an agent may ever hold.
// Hostnames are canonicalized to lowercase; set order is the signing order.
struct CapabilityBoundary {
  std::set<SemanticPermission> permissions;
  std::set<std::string> domain_allowlist;

  bool operator==(const CapabilityBoundary&) const = default;

  // domain_allowlist nonempty iff NETWORK_EGRESS is granted
  bool well_formed() const;
  Bytes canonical() const;
  void encode(CanonicalWriter& w) const;
  static std::optional<CapabilityBoundary> decode(CanonicalReader& r);
};

// <developer, bundle, user> triple; rendered "did:aura:<dev>:<bundle-hex>:<user>".
// Components may not contain ':' so the rendering stays injective.
struct AgentDid {
  std::string developer;
  Digest bundle_fingerprint{};
  std::string user_account;

  auto operator<=>(const AgentDid&) const = default;

  std::string render() const;
  bool well_formed() const;
  Bytes canonical() const;
  void encode(CanonicalWriter& w) const;
  static std::optional<AgentDid> decode(CanonicalReader& r);
};

struct TaskSpec {
  std::string description;
};

}  // namespace aura
