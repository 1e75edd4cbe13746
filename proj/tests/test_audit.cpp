#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "aura/audit.hpp"
#include "support.hpp"

using namespace aura;
using namespace aura::audit;

namespace {

struct LogFixture {
  platform::Platform plat;
  std::string store_path;
  AuditLog log;

  explicit LogFixture(uint64_t seed = 21, const std::string& name = "aura_test_audit.alog")
      : plat(seed), store_path("/tmp/" + name), log((boot(plat), plat), store_path) {}

  static platform::Platform& boot(platform::Platform& p) {
    auto images = platform::default_boot_images();
    auto outcome = p.secure_boot(images, platform::measure_images(images));
    REQUIRE(outcome.state == platform::BootState::Online);
    return p;
  }

  TokenId session(uint8_t fill) {
    TokenId t{};
    t.fill(fill);
    log.register_session(t);
    return t;
  }
};

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const Bytes& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<long>(data.size()));
}

}  // namespace

TEST_CASE("records chain and sensitive ops are forced CRITICAL") {
  LogFixture fx;
  auto s = fx.session(1);
  auto a = fx.log.append(s, Digest{}, Event::USER_INSTRUCTION, Severity::INFO, "open notes");
  REQUIRE(a.ok());
  CHECK(a.value().severity == Severity::INFO);
  CHECK(a.value().prev_hash == genesis_hash());

  auto b = fx.log.append(s, Digest{}, Event::SENSITIVE_OP, Severity::INFO, "PAYMENT intercept");
  REQUIRE(b.ok());
  CHECK(b.value().severity == Severity::CRITICAL);
  CHECK(b.value().prev_hash == a.value().this_hash);
}

TEST_CASE("appends to unregistered sessions are rejected unless lifecycle events") {
  LogFixture fx;
  TokenId ghost{};
  ghost.fill(9);
  auto res = fx.log.append(ghost, Digest{}, Event::DECISION, Severity::INFO, "x");
  REQUIRE(!res.ok());
  CHECK(res.code() == Errc::kUnknownSession);
  CHECK(fx.log.append(ghost, Digest{}, Event::AUTH, Severity::INFO, "auth attempt").ok());
  CHECK(fx.log.append(ghost, Digest{}, Event::REVOCATION, Severity::WARN, "revoked").ok());
}

TEST_CASE("verify_chain flags deletion at k+1 and edits at k") {
  LogFixture fx;
  auto s = fx.session(2);
  for (int i = 0; i < 8; ++i) {
    REQUIRE(fx.log.append(s, Digest{}, Event::DECISION, Severity::INFO,
                          "payload " + std::to_string(i))
                .ok());
  }
  auto records = fx.log.records();
  CHECK(verify_chain(records).intact);

  auto deleted = records;
  deleted.erase(deleted.begin() + 3);
  auto verdict = verify_chain(deleted);
  CHECK_FALSE(verdict.intact);
  CHECK(verdict.broken_at == 4);

  auto edited = records;
  edited[5].payload_digest[0] ^= 0xFF;
  verdict = verify_chain(edited);
  CHECK_FALSE(verdict.intact);
  CHECK(verdict.broken_at == 5);
}

TEST_CASE("merkle root matches the independent oracle and export verifies") {
  LogFixture fx;
  auto s = fx.session(3);
  for (int i = 0; i < 7; ++i) {
    REQUIRE(fx.log.append(s, Digest{}, Event::DECISION, Severity::INFO,
                          "entry " + std::to_string(i))
                .ok());
  }
  auto records = fx.log.records();
  std::vector<Digest> leaves;
  for (const auto& r : records) leaves.push_back(r.this_hash);
  CHECK(merkle_root(leaves) == test::merkle_oracle(leaves));

  auto ex = fx.log.export_range(0, records.back().record_id);
  REQUIRE(ex.ok());
  CHECK(ex.value().merkle_root == test::merkle_oracle(leaves));
  CHECK(ex.value().verify(fx.plat.device_attestation_key()));

  // substituting any record changes the root
  for (size_t i = 0; i < leaves.size(); ++i) {
    auto mutated = leaves;
    mutated[i][3] ^= 0x10;
    CHECK(test::merkle_oracle(mutated) != ex.value().merkle_root);
  }

  // windowed export over a subrange also verifies
  auto sub = fx.log.export_range(2, 5);
  REQUIRE(sub.ok());
  std::vector<Digest> sub_leaves(leaves.begin() + 2, leaves.begin() + 6);
  CHECK(sub.value().merkle_root == test::merkle_oracle(sub_leaves));
}

TEST_CASE("summarize renders ordered lines with the critical marker") {
  LogFixture fx;
  auto s = fx.session(4);
  auto empty = fx.log.summarize(s);
  REQUIRE(empty.ok());
  CHECK(empty.value() == "session " + hex_of(s) + "\n");

  Digest actor = platform::hash(std::string_view{"some-aic"});
  fx.log.register_actor(actor, "bookit/user1");
  REQUIRE(fx.log.append(s, actor, Event::USER_INSTRUCTION, Severity::INFO, "book a train").ok());
  REQUIRE(fx.log.append(s, actor, Event::SENSITIVE_OP, Severity::CRITICAL, "intercept pay").ok());
  REQUIRE(fx.log.append(s, actor, Event::DECISION, Severity::INFO, "direct pass").ok());

  auto report = fx.log.summarize(s);
  REQUIRE(report.ok());
  std::istringstream lines(report.value());
  std::string line;
  std::getline(lines, line);  // header
  std::vector<std::string> body;
  while (std::getline(lines, line)) body.push_back(line);
  REQUIRE(body.size() == 3);
  CHECK(body[0].find("bookit/user1") != std::string::npos);
  CHECK(body[0].find("USER_INSTRUCTION") != std::string::npos);
  CHECK(body[1].find("! ") != std::string::npos);  // CRITICAL marker
  CHECK(body[2].find("DECISION") != std::string::npos);

  auto unknown = fx.log.summarize(TokenId{{0xde, 0xad}});
  CHECK(!unknown.ok());
}

TEST_CASE("erase destroys payloads, appends a tombstone, chain stays intact") {
  LogFixture fx(22, "aura_test_audit_erase.alog");
  auto s1 = fx.session(5);
  auto s2 = fx.session(6);
  REQUIRE(fx.log.append(s1, Digest{}, Event::USER_INSTRUCTION, Severity::INFO,
                        "SECRET-FIXTURE-884203")
              .ok());
  REQUIRE(fx.log.append(s2, Digest{}, Event::DECISION, Severity::INFO, "keep me").ok());
  REQUIRE(fx.log.append(s1, Digest{}, Event::DECISION, Severity::INFO, "also secret").ok());

  auto tomb = fx.log.erase(EraseScope::Session, s1);
  REQUIRE(tomb.ok());
  CHECK(tomb.value().event == Event::REVOCATION);

  // transparency report for the erased session shows only the tombstone
  auto report = fx.log.summarize(s1);
  REQUIRE(report.ok());
  std::string body = report.value().substr(report.value().find('\n') + 1);
  CHECK(body.find("tombstone scope=session") != std::string::npos);
  CHECK(body.find("SECRET-FIXTURE") == std::string::npos);
  CHECK(body.find("also secret") == std::string::npos);

  // the other session is untouched
  CHECK(fx.log.payload_of(1).has_value());
  CHECK_FALSE(fx.log.payload_of(0).has_value());

  // chain remains verifiable in memory and on disk
  CHECK(verify_chain(fx.log.records()).intact);
  CHECK(AuditLog::verify_store(fx.store_path, fx.log.at_rest_key()).intact);

  // export over a range spanning the tombstone succeeds and matches the oracle
  auto records = fx.log.records();
  auto ex = fx.log.export_range(0, records.back().record_id);
  REQUIRE(ex.ok());
  std::vector<Digest> leaves;
  for (const auto& r : records) leaves.push_back(r.this_hash);
  CHECK(ex.value().merkle_root == test::merkle_oracle(leaves));

  // erased payloads are gone from the store bytes too
  auto raw = read_file(fx.store_path);
  std::string raw_s(raw.begin(), raw.end());
  CHECK(raw_s.find("SECRET-FIXTURE-884203") == std::string::npos);
}

TEST_CASE("no payload plaintext at rest") {
  LogFixture fx(23, "aura_test_audit_plain.alog");
  auto s = fx.session(7);
  std::string sensitive = "verification passcode is 884203";
  REQUIRE(fx.log.append(s, Digest{}, Event::AA_RESPONSE, Severity::INFO, sensitive).ok());
  auto raw = read_file(fx.store_path);
  std::string raw_s(raw.begin(), raw.end());
  CHECK(raw_s.find(sensitive) == std::string::npos);
  CHECK(raw_s.find("884203") == std::string::npos);
}

TEST_CASE("store tampering and deletion are always detected") {
  LogFixture fx(24, "aura_test_audit_tamper.alog");
  auto s = fx.session(8);
  for (int i = 0; i < 12; ++i) {
    REQUIRE(fx.log.append(s, Digest{}, Event::DECISION, Severity::INFO,
                          "record payload number " + std::to_string(i))
                .ok());
  }
  auto key = fx.log.at_rest_key();
  REQUIRE(AuditLog::verify_store(fx.store_path, key).intact);
  Bytes pristine = read_file(fx.store_path);

  DetRng rng(31);
  int detected = 0;
  const int trials = 120;
  for (int i = 0; i < trials; ++i) {
    Bytes mutated = pristine;
    if (i % 3 == 0) {
      // delete a random byte range
      size_t start = 8 + rng.u64() % (mutated.size() - 9);
      size_t len = 1 + rng.u64() % 32;
      len = std::min(len, mutated.size() - start);
      mutated.erase(mutated.begin() + static_cast<long>(start),
                    mutated.begin() + static_cast<long>(start + len));
    } else {
      size_t pos = 8 + rng.u64() % (mutated.size() - 8);
      mutated[pos] ^= static_cast<uint8_t>(1 + rng.u64() % 255);
    }
    write_file(fx.store_path, mutated);
    if (!AuditLog::verify_store(fx.store_path, key).intact) ++detected;
  }
  CHECK(detected == trials);

  write_file(fx.store_path, pristine);
  CHECK(AuditLog::verify_store(fx.store_path, key).intact);
}

TEST_CASE("whole-frame deletion breaks the chain at the successor") {
  LogFixture fx(25, "aura_test_audit_frame.alog");
  auto s = fx.session(9);
  for (int i = 0; i < 5; ++i) {
    REQUIRE(fx.log.append(s, Digest{}, Event::DECISION, Severity::INFO, "p").ok());
  }
  // locate frame boundaries by walking the canonical fields
  Bytes raw = read_file(fx.store_path);
  Bytes body(raw.begin() + 8, raw.end());
  CanonicalReader r(body);
  auto hint = r.field_bytes();  // clear store hint precedes the frames
  REQUIRE(hint.has_value());
  size_t consumed = 4 + hint->size();
  std::vector<std::pair<size_t, size_t>> extents;
  while (!r.done()) {
    size_t start = consumed;
    for (int f = 0; f < 10; ++f) {
      auto field = r.field_bytes();
      REQUIRE(field.has_value());
      consumed += 4 + field->size();
    }
    extents.emplace_back(start, consumed);
  }
  REQUIRE(extents.size() == 5);

  const size_t k = 2;
  Bytes mutated(raw.begin(), raw.begin() + 8);
  for (size_t i = 0; i < extents.size(); ++i) {
    if (i == k) continue;
    mutated.insert(mutated.end(), body.begin() + static_cast<long>(extents[i].first),
                   body.begin() + static_cast<long>(extents[i].second));
  }
  write_file(fx.store_path, mutated);
  auto verdict = AuditLog::verify_store(fx.store_path, fx.log.at_rest_key());
  CHECK_FALSE(verdict.intact);
  CHECK(verdict.broken_at == k + 1);
}

TEST_CASE("a resumed store preserves records and payloads") {
  std::string path = "/tmp/aura_test_audit_resume.alog";
  platform::Platform plat(26);
  LogFixture::boot(plat);
  {
    AuditLog log(plat, path);
    TokenId s{};
    s.fill(3);
    log.register_session(s);
    REQUIRE(log.append(s, Digest{}, Event::USER_INSTRUCTION, Severity::INFO, "hello").ok());
    REQUIRE(log.append(s, Digest{}, Event::DECISION, Severity::INFO, "world").ok());
  }
  AuditLog resumed(plat, path, /*resume=*/true);
  REQUIRE(resumed.healthy());
  auto records = resumed.records();
  REQUIRE(records.size() == 2);
  CHECK(verify_chain(records).intact);
  CHECK(resumed.payload_of(0) == std::optional<std::string>("hello"));
  CHECK(resumed.payload_of(1) == std::optional<std::string>("world"));
  // appends continue the chain
  TokenId s2{};
  s2.fill(3);
  resumed.register_session(s2);
  auto more = resumed.append(s2, Digest{}, Event::DECISION, Severity::INFO, "again");
  REQUIRE(more.ok());
  CHECK(more.value().prev_hash == records.back().this_hash);
}

TEST_CASE("export refuses a broken range") {
  LogFixture fx(27, "aura_test_audit_broken.alog");
  auto s = fx.session(10);
  REQUIRE(fx.log.append(s, Digest{}, Event::DECISION, Severity::INFO, "x").ok());
  auto empty = fx.log.export_range(5, 10);
  REQUIRE(!empty.ok());
}
