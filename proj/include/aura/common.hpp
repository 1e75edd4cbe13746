#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace aura {

using Bytes = std::vector<uint8_t>;

Bytes to_bytes(std::string_view s);
std::string to_string(const Bytes& b);
std::string hex_encode(const uint8_t* data, size_t len);
std::string hex_encode(const Bytes& b);
std::optional<Bytes> hex_decode(std::string_view hex);

// Kernel-wide error vocabulary. Operations report the subset the contract
// names; the single enum keeps audit payloads and CLI diagnostics uniform.
enum class Errc {
  kKernelUnavailable,
  kCallerMismatch,
  kUnknownHandle,
  kDuplicateDeveloper,
  kUnknownDeveloper,
  kBadManifestSignature,
  kPolicyViolation,
  kUnknownCategory,
  kUnknownSerial,
  kInvalidAic,
  kRevokedAic,
  kProofFailure,
  kFingerprintMismatch,
  kUnknownToken,
  kProcessMismatch,
  kTokenInvalidated,
  kNotSystemAgent,
  kTargetUnavailable,
  kUnverifiedObservation,
  kApprovalUnavailable,
  kJudgeUnavailable,
  kUnknownCell,
  kIntegrityFailure,
  kUnknownSession,
  kStoreUnavailable,
  kBrokenChain,
  kUnknownMove,
  kScenarioInvalid,
  kUnknownRole,
  kBadInput,
};

std::string_view errc_name(Errc e);

struct Error {
  Errc code;
  std::string detail;

  std::string to_string() const;
};

template <typename T>
class Result {
 public:
  Result(T value) : v_(std::move(value)) {}
  Result(Error err) : v_(std::move(err)) {}
  Result(Errc code, std::string detail = {}) : v_(Error{code, std::move(detail)}) {}

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& { return std::get<T>(v_); }
  T& value() & { return std::get<T>(v_); }
  T&& take() && { return std::get<T>(std::move(v_)); }

  const Error& error() const { return std::get<Error>(v_); }
  Errc code() const { return error().code; }

 private:
  std::variant<T, Error> v_;
};

// Result<void> stand-in.
struct Unit {};
using Status = Result<Unit>;
inline Status ok_status() { return Status(Unit{}); }

// Canonical encoding: every field is length-prefixed (u32 little-endian byte
// count) and concatenated in declared field order. Composites nest by
// encoding their own canonical form as a single byte field. The framing is
// injective, so the byte stream is usable directly as a signing payload.
class CanonicalWriter {
 public:
  void field_bytes(const uint8_t* data, size_t len);
  void field_bytes(const Bytes& b) { field_bytes(b.data(), b.size()); }
  void field_str(std::string_view s);
  void field_u64(uint64_t v);
  void field_u8(uint8_t v);
  void field_count(uint32_t n);  // list cardinality, fixed 4-byte field

  const Bytes& bytes() const { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

// Mirror of CanonicalWriter for persistence files. Reads return nullopt on
// truncation instead of throwing.
class CanonicalReader {
 public:
  explicit CanonicalReader(const Bytes& src) : src_(src) {}

  std::optional<Bytes> field_bytes();
  std::optional<std::string> field_str();
  std::optional<uint64_t> field_u64();
  std::optional<uint8_t> field_u8();
  std::optional<uint32_t> field_count();
  bool done() const { return pos_ == src_.size(); }

 private:
  const Bytes& src_;
  size_t pos_ = 0;
};

}  // namespace aura
