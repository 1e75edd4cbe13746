#include "aura/types.hpp"

#include <algorithm>

namespace aura {

std::string_view permission_name(SemanticPermission p) {
  switch (p) {
    case SemanticPermission::READ_CONTACTS: return "READ_CONTACTS";
    case SemanticPermission::ACCESS_FINE_LOCATION: return "ACCESS_FINE_LOCATION";
    case SemanticPermission::RECORD_AUDIO: return "RECORD_AUDIO";
    case SemanticPermission::SEND_MESSAGE: return "SEND_MESSAGE";
    case SemanticPermission::PAYMENT: return "PAYMENT";
    case SemanticPermission::WRITE_STORAGE: return "WRITE_STORAGE";
    case SemanticPermission::INSTALL_PACKAGES: return "INSTALL_PACKAGES";
    case SemanticPermission::MODIFY_SETTINGS: return "MODIFY_SETTINGS";
    case SemanticPermission::NETWORK_EGRESS: return "NETWORK_EGRESS";
    case SemanticPermission::READ_NOTES: return "READ_NOTES";
    case SemanticPermission::READ_CALENDAR: return "READ_CALENDAR";
  }
  return "UNKNOWN";
}

std::optional<SemanticPermission> permission_from_name(std::string_view name) {
  for (uint8_t i = 0; i <= static_cast<uint8_t>(SemanticPermission::READ_CALENDAR); ++i) {
    auto p = static_cast<SemanticPermission>(i);
    if (permission_name(p) == name) return p;
  }
  return std::nullopt;
}

std::string_view category_name(CriticalNodeCategory c) {
  switch (c) {
    case CriticalNodeCategory::FINANCIAL: return "FINANCIAL";
    case CriticalNodeCategory::DATA_PERSISTENCE: return "DATA_PERSISTENCE";
    case CriticalNodeCategory::PRIVACY_ACCESS: return "PRIVACY_ACCESS";
    case CriticalNodeCategory::SYSTEM_INTEGRITY: return "SYSTEM_INTEGRITY";
    case CriticalNodeCategory::NETWORK_EGRESS: return "NETWORK_EGRESS";
  }
  return "UNKNOWN";
}

std::optional<CriticalNodeCategory> category_from_name(std::string_view name) {
  for (uint8_t i = 0; i <= static_cast<uint8_t>(CriticalNodeCategory::NETWORK_EGRESS); ++i) {
    auto c = static_cast<CriticalNodeCategory>(i);
    if (category_name(c) == name) return c;
  }
  return std::nullopt;
}

bool CapabilityBoundary::well_formed() const {
  bool egress = permissions.count(SemanticPermission::NETWORK_EGRESS) > 0;
  if (egress != !domain_allowlist.empty()) return false;
  for (const auto& d : domain_allowlist) {
    if (d.empty()) return false;
    if (std::any_of(d.begin(), d.end(), [](char c) { return c >= 'A' && c <= 'Z'; })) return false;
  }
  return true;
}

void CapabilityBoundary::encode(CanonicalWriter& w) const {
  w.field_count(static_cast<uint32_t>(permissions.size()));
  for (auto p : permissions) w.field_u8(static_cast<uint8_t>(p));
  w.field_count(static_cast<uint32_t>(domain_allowlist.size()));
  for (const auto& d : domain_allowlist) w.field_str(d);
}

Bytes CapabilityBoundary::canonical() const {
  CanonicalWriter w;
  encode(w);
  return w.take();
}

std::optional<CapabilityBoundary> CapabilityBoundary::decode(CanonicalReader& r) {
  CapabilityBoundary b;
  auto np = r.field_count();
  if (!np) return std::nullopt;
  for (uint32_t i = 0; i < *np; ++i) {
    auto v = r.field_u8();
    if (!v || *v > static_cast<uint8_t>(SemanticPermission::READ_CALENDAR)) return std::nullopt;
    b.permissions.insert(static_cast<SemanticPermission>(*v));
  }
  auto nd = r.field_count();
  if (!nd) return std::nullopt;
  for (uint32_t i = 0; i < *nd; ++i) {
    auto d = r.field_str();
    if (!d) return std::nullopt;
    b.domain_allowlist.insert(*d);
  }
  return b;
}

std::string AgentDid::render() const {
  return "did:aura:" + developer + ":" + hex_encode(bundle_fingerprint.data(), 32) + ":" +
         user_account;
}

bool AgentDid::well_formed() const {
  auto clean = [](const std::string& s) {
    return !s.empty() && s.find(':') == std::string::npos;
  };
  return clean(developer) && clean(user_account);
}

void AgentDid::encode(CanonicalWriter& w) const {
  w.field_str(developer);
  w.field_bytes(bundle_fingerprint.data(), 32);
  w.field_str(user_account);
}

Bytes AgentDid::canonical() const {
  CanonicalWriter w;
  encode(w);
  return w.take();
}

std::optional<AgentDid> AgentDid::decode(CanonicalReader& r) {
  AgentDid did;
  auto dev = r.field_str();
  auto fp = r.field_bytes();
  auto user = r.field_str();
  if (!dev || !fp || fp->size() != 32 || !user) return std::nullopt;
  did.developer = *dev;
  std::copy(fp->begin(), fp->end(), did.bundle_fingerprint.begin());
  did.user_account = *user;
  return did;
}

}  // namespace aura
