#include "aura/common.hpp"

namespace aura {

Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

std::string to_string(const Bytes& b) { return std::string(b.begin(), b.end()); }

std::string hex_encode(const uint8_t* data, size_t len) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (size_t i = 0; i < len; ++i) {
    out.push_back(digits[data[i] >> 4]);
    out.push_back(digits[data[i] & 0xf]);
  }
  return out;
}

std::string hex_encode(const Bytes& b) { return hex_encode(b.data(), b.size()); }

static int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::optional<Bytes> hex_decode(std::string_view hex) {
  if (hex.size() % 2 != 0) return std::nullopt;
  Bytes out;
  out.reserve(hex.size() / 2);
  for (size_t i = 0; i < hex.size(); i += 2) {
    int hi = hex_nibble(hex[i]);
    int lo = hex_nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<uint8_t>((hi << 4) | lo));
  }
  return out;
}

std::string_view errc_name(Errc e) {
  switch (e) {
    case Errc::kKernelUnavailable: return "KernelUnavailable";
    case Errc::kCallerMismatch: return "CallerMismatch";
    case Errc::kUnknownHandle: return "UnknownHandle";
    case Errc::kDuplicateDeveloper: return "DuplicateDeveloper";
    case Errc::kUnknownDeveloper: return "UnknownDeveloper";
    case Errc::kBadManifestSignature: return "BadManifestSignature";
    case Errc::kPolicyViolation: return "PolicyViolation";
    case Errc::kUnknownCategory: return "UnknownCategory";
    case Errc::kUnknownSerial: return "UnknownSerial";
    case Errc::kInvalidAic: return "InvalidAic";
    case Errc::kRevokedAic: return "RevokedAic";
    case Errc::kProofFailure: return "ProofFailure";
    case Errc::kFingerprintMismatch: return "FingerprintMismatch";
    case Errc::kUnknownToken: return "UnknownToken";
    case Errc::kProcessMismatch: return "ProcessMismatch";
    case Errc::kTokenInvalidated: return "TokenInvalidated";
    case Errc::kNotSystemAgent: return "NotSystemAgent";
    case Errc::kTargetUnavailable: return "TargetUnavailable";
    case Errc::kUnverifiedObservation: return "UnverifiedObservation";
    case Errc::kApprovalUnavailable: return "ApprovalUnavailable";
    case Errc::kJudgeUnavailable: return "JudgeUnavailable";
    case Errc::kUnknownCell: return "UnknownCell";
    case Errc::kIntegrityFailure: return "IntegrityFailure";
    case Errc::kUnknownSession: return "UnknownSession";
    case Errc::kStoreUnavailable: return "StoreUnavailable";
    case Errc::kBrokenChain: return "BrokenChain";
    case Errc::kUnknownMove: return "UnknownMove";
    case Errc::kScenarioInvalid: return "ScenarioInvalid";
    case Errc::kUnknownRole: return "UnknownRole";
    case Errc::kBadInput: return "BadInput";
  }
  return "Unknown";
}

std::string Error::to_string() const {
  std::string s{errc_name(code)};
  if (!detail.empty()) {
    s += ": ";
    s += detail;
  }
  return s;
}

void CanonicalWriter::field_bytes(const uint8_t* data, size_t len) {
  auto n = static_cast<uint32_t>(len);
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<uint8_t>(n >> (8 * i)));
  out_.insert(out_.end(), data, data + len);
}

void CanonicalWriter::field_str(std::string_view s) {
  field_bytes(reinterpret_cast<const uint8_t*>(s.data()), s.size());
}

void CanonicalWriter::field_u64(uint64_t v) {
  uint8_t buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<uint8_t>(v >> (8 * i));
  field_bytes(buf, 8);
}

void CanonicalWriter::field_u8(uint8_t v) { field_bytes(&v, 1); }

void CanonicalWriter::field_count(uint32_t n) {
  uint8_t buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<uint8_t>(n >> (8 * i));
  field_bytes(buf, 4);
}

std::optional<Bytes> CanonicalReader::field_bytes() {
  if (pos_ + 4 > src_.size()) return std::nullopt;
  uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<uint32_t>(src_[pos_ + i]) << (8 * i);
  pos_ += 4;
  if (pos_ + len > src_.size()) return std::nullopt;
  Bytes out(src_.begin() + static_cast<long>(pos_), src_.begin() + static_cast<long>(pos_ + len));
  pos_ += len;
  return out;
}

std::optional<std::string> CanonicalReader::field_str() {
  auto b = field_bytes();
  if (!b) return std::nullopt;
  return std::string(b->begin(), b->end());
}

std::optional<uint64_t> CanonicalReader::field_u64() {
  auto b = field_bytes();
  if (!b || b->size() != 8) return std::nullopt;
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>((*b)[i]) << (8 * i);
  return v;
}

std::optional<uint8_t> CanonicalReader::field_u8() {
  auto b = field_bytes();
  if (!b || b->size() != 1) return std::nullopt;
  return (*b)[0];
}

std::optional<uint32_t> CanonicalReader::field_count() {
  auto b = field_bytes();
  if (!b || b->size() != 4) return std::nullopt;
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>((*b)[i]) << (8 * i);
  return v;
}

}  // namespace aura
