#pragma once

#include <sodium.h>

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "aura/exec_control.hpp"
#include "aura/firewall.hpp"
#include "aura/judge.hpp"
#include "aura/session.hpp"

namespace aura::test {

// ---- Independent oracles (never call the implementation paths they check) --

// Luhn checksum, straight from the textbook definition.
inline bool luhn_oracle(const std::string& digits) {
  int sum = 0;
  bool dbl = false;
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    if (*it < '0' || *it > '9') return false;
    int d = *it - '0';
    if (dbl) {
      d *= 2;
      if (d > 9) d -= 9;
    }
    sum += d;
    dbl = !dbl;
  }
  return !digits.empty() && sum % 10 == 0;
}

// Recursive Merkle definition (duplicate-last, SHA-256 of raw concatenation).
inline Digest merkle_oracle(std::vector<Digest> level) {
  if (level.empty()) return audit::genesis_hash();
  if (level.size() == 1) return level[0];
  if (level.size() % 2 == 1) level.push_back(level.back());
  std::vector<Digest> next;
  for (size_t i = 0; i < level.size(); i += 2) {
    Bytes cat(level[i].begin(), level[i].end());
    cat.insert(cat.end(), level[i + 1].begin(), level[i + 1].end());
    next.push_back(platform::hash(cat));
  }
  return merkle_oracle(std::move(next));
}

// Graph-reachability taint oracle: a cell is tainted iff any ancestor entered
// tainted (externally) and no declassification sits between.
inline std::map<uint64_t, bool> reachability_taint_oracle(
    const std::vector<cognition::MemoryCell>& cells) {
  std::map<uint64_t, const cognition::MemoryCell*> by_id;
  for (const auto& c : cells) by_id[c.cell_id] = &c;
  std::map<uint64_t, bool> tainted;
  std::function<bool(uint64_t)> eval = [&](uint64_t id) -> bool {
    auto memo = tainted.find(id);
    if (memo != tainted.end()) return memo->second;
    const auto* cell = by_id.at(id);
    bool t;
    if (cell->declassified) {
      t = false;  // human-approved sanitization point
    } else if (cell->derivation.empty()) {
      t = cell->origin != "user" && cell->origin != "sa";
    } else {
      t = false;
      for (auto p : cell->derivation) t = t || eval(p);
    }
    tainted[id] = t;
    return t;
  };
  for (const auto& c : cells) eval(c.cell_id);
  return tainted;
}

// Exact-match egress oracle.
inline bool egress_oracle(std::string host, const std::set<std::string>& allowlist) {
  std::transform(host.begin(), host.end(), host.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return allowlist.count(host) > 0;
}

// Content-word intersection oracle for the drift rule.
inline size_t overlap_oracle(const std::string& a, const std::string& b) {
  auto wa = cognition::content_words(a);
  auto wb = cognition::content_words(b);
  std::set<std::string> sa(wa.begin(), wa.end());
  size_t shared = 0;
  std::set<std::string> counted;
  for (const auto& w : wb) {
    if (sa.count(w) && counted.insert(w).second) ++shared;
  }
  return shared;
}

// ---- Kernel fixture ---------------------------------------------------------

struct AgentHandle {
  AgentDid did;
  ProcessIdentity proc;
  registry::AgentIdentityCard aic;
  TokenId token{};
  bool authenticated = false;
};

// Boots a platform, stands up a registry/kernel/audit trio and provisions
// agents end to end, mirroring the simulator's setup path.
struct KernelFixture {
  platform::Platform plat;
  registry::Registry reg;
  audit::AuditLog log;
  session::Kernel kernel;
  int next_pid = 50;

  explicit KernelFixture(uint64_t seed = 7)
      : plat(seed),
        reg(seed + 1),
        log(plat, std::nullopt),
        kernel(plat, log, reg.root_key(), [this] { return reg.current_revocations(); }) {
    auto images = platform::default_boot_images();
    auto outcome = plat.secure_boot(images, platform::measure_images(images));
    if (outcome.state != platform::BootState::Online) std::abort();
  }

  AgentHandle make_agent(const std::string& name, registry::AppCategory category,
                         std::set<SemanticPermission> perms,
                         std::set<std::string> allowlist = {}, bool authenticate = true,
                         bool system_agent = false) {
    AgentHandle h;
    h.did = AgentDid{name + "-dev", platform::hash("bundle:" + name), "user1"};
    h.proc = ProcessIdentity{next_pid++, 1000 + next_pid, h.did.bundle_fingerprint};
    auto pub = kernel.provision_agent_key(h.did);
    CapabilityBoundary smax{std::move(perms), std::move(allowlist)};

    auto dev_seed = plat.random_bytes(32);
    PublicKey dev_pub{};
    std::array<uint8_t, 64> dev_secret{};
    crypto_sign_seed_keypair(dev_pub.data(), dev_secret.data(), dev_seed.data());
    (void)reg.enroll_developer(h.did.developer, dev_pub);
    auto sig = registry::Registry::sign_manifest(dev_secret, h.did, smax);
    auto aic = reg.issue_aic(h.did, pub.value(), smax, category, sig);
    if (!aic.ok()) std::abort();
    h.aic = aic.value();
    (void)kernel.install_aic(h.aic);
    if (system_agent) kernel.set_system_agent(h.did);

    if (authenticate) {
      auto tok = auth(h);
      if (tok.ok()) {
        h.token = tok.value().token_id;
        h.authenticated = true;
      }
    }
    return h;
  }

  Result<session::SessionToken> auth(AgentHandle& h) {
    Bytes nonce = kernel.begin_auth(h.proc);
    auto proof = kernel.agent_sign(h.did, h.proc, nonce);
    Signature sig{};
    if (proof.ok()) sig = proof.value();
    return kernel.authenticate_agent(h.proc, h.aic, sig);
  }

  Result<session::SessionToken> restart(AgentHandle& h) {
    kernel.on_process_terminated(h.proc);
    h.proc = ProcessIdentity{next_pid++, 1000 + next_pid, h.did.bundle_fingerprint};
    auto tok = auth(h);
    if (tok.ok()) h.token = tok.value().token_id;
    return tok;
  }
};

// Approval provider that records every request it answers.
class CapturingApproval : public approval::ApprovalProvider {
 public:
  explicit CapturingApproval(approval::Choice choice) : choice_(choice) {}
  Result<approval::Choice> decide(const approval::ApprovalRequest& req) override {
    requests.push_back(req);
    return choice_;
  }
  std::vector<approval::ApprovalRequest> requests;

 private:
  approval::Choice choice_;
};

inline std::string data_dir() { return AURA_DATA_DIR; }

}  // namespace aura::test
