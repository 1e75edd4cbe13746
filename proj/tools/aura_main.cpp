#include <CLI11.hpp>
#include <sodium.h>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "aura/sim/runner.hpp"

namespace fs = std::filesystem;
using namespace aura;

namespace {

std::string aura_home() {
  const char* env = std::getenv("AURA_HOME");
  return env && *env ? env : "./aura_home";
}

// The CLI demo derives developer keys deterministically from (seed, dev_id)
// so enroll and issue can run in separate invocations without key files.
std::array<uint8_t, 64> dev_secret_for(uint64_t seed, const std::string& dev_id,
                                       PublicKey* pub_out) {
  CanonicalWriter w;
  w.field_u64(seed);
  w.field_str("cli-developer-key");
  w.field_str(dev_id);
  Digest dseed = platform::hash(w.bytes());
  PublicKey pub{};
  std::array<uint8_t, 64> secret{};
  crypto_sign_seed_keypair(pub.data(), secret.data(), dseed.data());
  if (pub_out) *pub_out = pub;
  return secret;
}

Result<registry::Registry*> open_registry(registry::Registry& reg, const std::string& path) {
  if (fs::exists(path)) {
    auto st = reg.load_file(path);
    if (!st.ok()) return st.error();
  }
  return &reg;
}

std::optional<TokenId> parse_token_hex(const std::string& hex) {
  auto raw = hex_decode(hex);
  if (!raw || raw->size() != 16) return std::nullopt;
  TokenId t{};
  std::copy(raw->begin(), raw->end(), t.begin());
  return t;
}

int cmd_run(const std::vector<std::string>& scenario_files, const std::string& suite_dir,
            sim::RunOptions opt, const std::string& approval_mode, const std::string& report_path,
            const std::string& audit_prefix) {
  std::vector<sim::Scenario> scenarios;
  if (!suite_dir.empty()) {
    auto loaded = sim::load_scenario_dir(suite_dir);
    if (!loaded.ok()) {
      std::cerr << "error: " << loaded.error().to_string() << "\n";
      return 2;
    }
    scenarios = loaded.value();
  }
  for (const auto& f : scenario_files) {
    auto sc = sim::load_scenario(f);
    if (!sc.ok()) {
      std::cerr << "error: " << sc.error().to_string() << "\n";
      return 2;
    }
    scenarios.push_back(std::move(sc).take());
  }
  if (scenarios.empty()) {
    std::cerr << "error: no scenarios given (use --suite or --scenario)\n";
    return 2;
  }

  approval::InteractiveApprovalProvider interactive(std::cin, std::cout);
  std::unique_ptr<approval::ScriptedApprovalProvider> file_approvals;
  if (approval_mode == "interactive") {
    opt.approval_override = &interactive;
  } else if (approval_mode != "scripted" && !approval_mode.empty()) {
    std::ifstream in(approval_mode);
    if (!in) {
      std::cerr << "error: cannot open approval file " << approval_mode << "\n";
      return 2;
    }
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const std::exception& e) {
      std::cerr << "error: approval file: " << e.what() << "\n";
      return 2;
    }
    std::map<std::string, approval::Choice> decisions;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      auto c = approval::choice_from_name(it.value().get<std::string>());
      if (!c) {
        std::cerr << "error: bad choice for prompt " << it.key() << "\n";
        return 2;
      }
      decisions[it.key()] = *c;
    }
    file_approvals = std::make_unique<approval::ScriptedApprovalProvider>(decisions);
    opt.approval_override = file_approvals.get();
  }

  sim::SuiteMetrics metrics;
  for (const auto& sc : scenarios) {
    sim::RunOptions per = opt;
    if (!audit_prefix.empty()) {
      fs::create_directories(fs::path(audit_prefix).parent_path());
      per.audit_store_path = audit_prefix + sc.id + ".alog";
    }
    sim::Device device(sc, per);
    auto rep = device.run();
    if (sc.attack) {
      ++metrics.attack_total;
      if (rep.outcome == sim::OutcomeKind::Blocked) ++metrics.attack_blocked;
    } else {
      ++metrics.benign_total;
      if (rep.outcome == sim::OutcomeKind::Success) ++metrics.benign_success;
    }
    metrics.total_steps += rep.steps_used;
    metrics.reports.push_back(rep);
    std::cout << rep.render() << "\n";
  }
  std::cout << metrics.render();

  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::trunc);
    for (const auto& r : metrics.reports) out << r.render() << "\n";
    out << metrics.render();
  }
  return metrics.all_expected_met() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aura - agent kernel device simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string data_dir = AURA_DATA_DIR;
  uint64_t seed = 1;
  app.add_option("--data", data_dir, "data directory (blacklist, critical nodes, scenarios)");
  app.add_option("--seed", seed, "deterministic run seed");

  // run
  auto* run = app.add_subcommand("run", "run scenarios or suites through the simulated device");
  std::vector<std::string> scenario_files;
  std::string suite_dir;
  std::string mode = "enforced";
  bool optimistic = false;
  int window = 1;
  std::string approval_mode = "scripted";
  std::string blacklist_path;
  std::string tamper_stage;
  std::string report_path;
  std::string audit_prefix;
  run->add_option("--scenario", scenario_files, "scenario file (repeatable)");
  run->add_option("--suite", suite_dir, "directory of scenario files");
  run->add_option("--mode", mode, "enforced|passthrough")
      ->check(CLI::IsMember({"enforced", "passthrough"}));
  run->add_flag("--optimistic", optimistic, "enable optimistic verification with trust tokens");
  run->add_option("--window", window, "async verdict window W (optimistic mode)")
      ->check(CLI::PositiveNumber);
  run->add_option("--approval", approval_mode, "scripted | interactive | <decision-file.json>");
  run->add_option("--blacklist", blacklist_path, "override blacklist file");
  run->add_option("--tamper-stage", tamper_stage, "perturb one boot stage (fail-closed demo)");
  run->add_option("--report", report_path, "write the report stream to a file");
  run->add_option("--audit-store", audit_prefix,
                  "persist per-scenario audit stores under this path prefix");

  // registry
  auto* regcmd = app.add_subcommand("registry", "global agent registry operations");
  regcmd->fallthrough();
  std::string reg_file = aura_home() + "/registry.bin";
  regcmd->add_option("--file", reg_file, "registry record file");
  auto* enroll = regcmd->add_subcommand("enroll", "enroll a developer");
  std::string dev_id;
  enroll->add_option("--dev", dev_id, "developer id")->required();
  auto* issue = regcmd->add_subcommand("issue", "issue an agent identity card");
  std::string bundle, user_account = "user1", category_name_s;
  std::vector<std::string> perms, domains;
  issue->add_option("--dev", dev_id, "developer id")->required();
  issue->add_option("--bundle", bundle, "bundle name (fingerprint = sha256('bundle:'+name))")
      ->required();
  issue->add_option("--user", user_account, "user account");
  issue->add_option("--category", category_name_s, "app category")->required();
  issue->add_option("--perm", perms, "semantic permission (repeatable)");
  issue->add_option("--domain", domains, "egress allowlist hostname (repeatable)");
  auto* revoke = regcmd->add_subcommand("revoke", "revoke an issued AIC");
  uint64_t serial = 0;
  std::string reason = "operator revocation";
  revoke->add_option("--serial", serial, "AIC serial")->required();
  revoke->add_option("--reason", reason, "reason");
  auto* show = regcmd->add_subcommand("show", "list developers, AICs and revocations");
  (void)show;

  // audit
  auto* auditcmd = app.add_subcommand("audit", "inspect and manage audit stores");
  auditcmd->fallthrough();
  std::string store_path;
  auditcmd->add_option("--store", store_path, "audit store file")->required();
  auto* a_show = auditcmd->add_subcommand("show", "transparency report for a session");
  std::string session_hex;
  a_show->add_option("--session", session_hex, "session token id (hex, 32 chars)");
  auto* a_verify = auditcmd->add_subcommand("verify", "verify chain and payload integrity");
  auto* a_export = auditcmd->add_subcommand("export", "signed Merkle export over a record range");
  uint64_t first_id = 0, last_id = UINT64_MAX;
  a_export->add_option("--first", first_id, "first record id");
  a_export->add_option("--last", last_id, "last record id");
  auto* a_erase = auditcmd->add_subcommand("erase", "destroy payloads, keep a verifiable chain");
  std::string scope = "session", agent_hex;
  a_erase->add_option("--scope", scope, "session|agent|all")
      ->check(CLI::IsMember({"session", "agent", "all"}));
  a_erase->add_option("--session", session_hex, "session token id (hex)");
  a_erase->add_option("--agent", agent_hex, "AIC fingerprint (hex, 64 chars)");

  // boot
  auto* boot = app.add_subcommand("boot", "secure-boot demo against the measurement config");
  std::string measurements_path;
  std::string boot_tamper;
  boot->add_option("--measurements", measurements_path, "expected-measurement config file");
  boot->add_option("--tamper-stage", boot_tamper, "perturb one stage image");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    sim::RunOptions opt;
    opt.mode = mode == "enforced" ? session::KernelMode::Enforced
                                  : session::KernelMode::Passthrough;
    opt.seed = seed;
    opt.optimistic = optimistic;
    opt.window = window;
    opt.data_dir = data_dir;
    opt.tamper_stage = tamper_stage;
    if (suite_dir.empty() && scenario_files.empty()) suite_dir = data_dir + "/scenarios";
    return cmd_run(scenario_files, suite_dir, opt, approval_mode, report_path, audit_prefix);
  }

  if (regcmd->parsed()) {
    fs::create_directories(fs::path(reg_file).parent_path());
    registry::Registry reg(seed);
    auto opened = open_registry(reg, reg_file);
    if (!opened.ok()) {
      std::cerr << "error: " << opened.error().to_string() << "\n";
      return 2;
    }
    if (enroll->parsed()) {
      PublicKey pub{};
      dev_secret_for(seed, dev_id, &pub);
      auto res = reg.enroll_developer(dev_id, pub);
      if (!res.ok()) {
        std::cerr << "error: " << res.error().to_string() << "\n";
        return 1;
      }
      std::cout << "enrolled " << dev_id << " pubkey=" << hex_of(pub) << "\n";
    } else if (issue->parsed()) {
      auto cat = registry::app_category_from_name(category_name_s);
      if (!cat) {
        std::cerr << "error: unknown category " << category_name_s << "\n";
        return 2;
      }
      CapabilityBoundary smax;
      for (const auto& p : perms) {
        auto perm = permission_from_name(p);
        if (!perm) {
          std::cerr << "error: unknown permission " << p << "\n";
          return 2;
        }
        smax.permissions.insert(*perm);
      }
      for (auto d : domains) {
        std::transform(d.begin(), d.end(), d.begin(), ::tolower);
        smax.domain_allowlist.insert(d);
      }
      AgentDid did{dev_id, platform::hash("bundle:" + bundle), user_account};
      PublicKey dev_pub{};
      auto dev_secret = dev_secret_for(seed, dev_id, &dev_pub);
      // Agent key for the demo AIC is derived the same way.
      PublicKey agent_pub{};
      dev_secret_for(seed, dev_id + "/" + bundle + "/agent", &agent_pub);
      auto sig = registry::Registry::sign_manifest(dev_secret, did, smax);
      auto aic = reg.issue_aic(did, agent_pub, smax, *cat, sig);
      if (!aic.ok()) {
        std::cerr << "issue failed: " << aic.error().to_string() << "\n";
        return 1;
      }
      std::cout << "issued serial=" << aic.value().serial << " did=" << did.render()
                << " fingerprint=" << hex_of(aic.value().fingerprint()) << "\n";
    } else if (revoke->parsed()) {
      auto res = reg.revoke_aic(serial, reason);
      if (!res.ok()) {
        std::cerr << "error: " << res.error().to_string() << "\n";
        return 1;
      }
      std::cout << "revoked serial=" << serial << " epoch=" << res.value().epoch << "\n";
    } else {
      std::cout << "developers:\n";
      for (const auto& d : reg.developers()) {
        std::cout << "  " << d.dev_id << " " << (d.active ? "active" : "revoked")
                  << " pubkey=" << hex_of(d.dev_pubkey) << "\n";
      }
      std::cout << "issued:\n";
      for (const auto& aic : reg.issued()) {
        std::cout << "  serial=" << aic.serial << " " << aic.did.render() << " perms=";
        bool first = true;
        for (auto p : aic.s_max.permissions) {
          std::cout << (first ? "" : ",") << permission_name(p);
          first = false;
        }
        std::cout << "\n";
      }
      auto rev = reg.current_revocations();
      std::cout << "revocations epoch=" << rev.epoch << " serials=";
      bool first = true;
      for (auto s : rev.revoked_serials) {
        std::cout << (first ? "" : ",") << s;
        first = false;
      }
      std::cout << "\n";
    }
    auto st = reg.save(reg_file);
    if (!st.ok()) {
      std::cerr << "error: " << st.error().to_string() << "\n";
      return 1;
    }
    return 0;
  }

  if (auditcmd->parsed()) {
    // stores written by `run` carry the scenario id; the device key derives
    // from (run seed, scenario id) exactly as it did during the run
    uint64_t device_seed = seed;
    if (auto hint = audit::AuditLog::read_store_hint(store_path);
        hint.ok() && !hint.value().empty()) {
      device_seed = sim::scenario_seed(seed, hint.value());
    }
    platform::Platform plat(device_seed);
    auto images = platform::default_boot_images();
    (void)plat.secure_boot(images, platform::measure_images(images));

    if (a_verify->parsed()) {
      auto verdict = audit::AuditLog::verify_store(store_path, plat.derive_device_secret("audit-at-rest"));
      if (verdict.intact) {
        std::cout << "intact\n";
        return 0;
      }
      std::cout << "broken at record " << verdict.broken_at << "\n";
      return 1;
    }

    audit::AuditLog log(plat, store_path, /*resume=*/true);
    if (!log.healthy()) {
      std::cerr << "error: cannot resume store " << store_path << "\n";
      return 2;
    }
    if (a_show->parsed()) {
      if (session_hex.empty()) {
        for (const auto& rec : log.records()) {
          auto payload = log.payload_of(rec.record_id);
          std::cout << "#" << rec.record_id << " "
                    << (rec.severity == audit::Severity::CRITICAL ? "! " : "  ")
                    << audit::event_name(rec.event) << " [" << audit::severity_name(rec.severity)
                    << "] " << (payload ? *payload : "[erased]") << "\n";
        }
        return 0;
      }
      auto session = parse_token_hex(session_hex);
      if (!session) {
        std::cerr << "error: --session must be 32 hex chars\n";
        return 2;
      }
      auto report = log.summarize(*session);
      if (!report.ok()) {
        std::cerr << "error: " << report.error().to_string() << "\n";
        return 1;
      }
      std::cout << report.value();
      return 0;
    }
    if (a_export->parsed()) {
      if (last_id == UINT64_MAX) {
        auto recs = log.records();
        last_id = recs.empty() ? 0 : recs.back().record_id;
      }
      auto ex = log.export_range(first_id, last_id);
      if (!ex.ok()) {
        std::cerr << "export failed: " << ex.error().to_string() << "\n";
        return 1;
      }
      std::cout << "range=" << ex.value().first_id << "-" << ex.value().last_id
                << " merkle_root=" << hex_of(ex.value().merkle_root)
                << " signature=" << hex_encode(ex.value().signature.data(), 64)
                << " verifies=" << (ex.value().verify(plat.device_attestation_key()) ? "yes" : "no")
                << "\n";
      return 0;
    }
    if (a_erase->parsed()) {
      audit::EraseScope es = scope == "session" ? audit::EraseScope::Session
                             : scope == "agent" ? audit::EraseScope::Agent
                                                : audit::EraseScope::All;
      TokenId session{};
      Digest agent{};
      if (es == audit::EraseScope::Session) {
        auto s = parse_token_hex(session_hex);
        if (!s) {
          std::cerr << "error: --session must be 32 hex chars\n";
          return 2;
        }
        session = *s;
      }
      if (es == audit::EraseScope::Agent) {
        auto raw = hex_decode(agent_hex);
        if (!raw || raw->size() != 32) {
          std::cerr << "error: --agent must be 64 hex chars\n";
          return 2;
        }
        std::copy(raw->begin(), raw->end(), agent.begin());
      }
      auto tomb = log.erase(es, session, agent);
      if (!tomb.ok()) {
        std::cerr << "erase failed: " << tomb.error().to_string() << "\n";
        return 1;
      }
      std::cout << "erased scope=" << scope << " tombstone=#" << tomb.value().record_id << " "
                << *log.payload_of(tomb.value().record_id) << "\n";
      return 0;
    }
    std::cerr << "error: audit requires a subcommand\n";
    return 2;
  }

  if (boot->parsed()) {
    platform::Platform plat(seed);
    auto images = platform::default_boot_images();
    std::map<std::string, Digest> expected;
    if (!measurements_path.empty()) {
      auto loaded = platform::load_measurement_config(measurements_path);
      if (!loaded.ok()) {
        std::cerr << "error: " << loaded.error().to_string() << "\n";
        return 2;
      }
      expected = loaded.value();
    } else {
      expected = platform::measure_images(images);
    }
    if (!boot_tamper.empty()) {
      auto it = images.find(boot_tamper);
      if (it == images.end()) {
        std::cerr << "error: unknown stage " << boot_tamper << "\n";
        return 2;
      }
      it->second.push_back(0x00);
    }
    auto outcome = plat.secure_boot(images, expected);
    if (outcome.state == platform::BootState::Online) {
      Bytes nonce = to_bytes("boot-demo-nonce");
      auto att = plat.issue_attestation(nonce);
      std::cout << "Online\n";
      if (att.ok()) {
        std::cout << "attestation verifies="
                  << (platform::verify_attestation(att.value(), nonce,
                                                   plat.device_attestation_key())
                          ? "yes"
                          : "no")
                  << "\n";
      }
      return 0;
    }
    std::cout << "FailClosed: agentic operations unavailable\n";
    return 1;
  }

  return 0;
}
