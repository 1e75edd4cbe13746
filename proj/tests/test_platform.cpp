#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <fstream>
#include <set>
#include <thread>

#include "aura/platform.hpp"
#include "support.hpp"

using namespace aura;
using namespace aura::platform;

namespace {

struct PlatFixture {
  Platform plat;
  explicit PlatFixture(uint64_t seed = 11) : plat(seed) {
    auto images = default_boot_images();
    REQUIRE(plat.secure_boot(images, measure_images(images)).state == BootState::Online);
  }
};

}  // namespace

TEST_CASE("hash matches the published empty-string vector") {
  CHECK(hex_of(hash(Bytes{})) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("hash is deterministic") {
  CHECK(hash(std::string_view{"a"}) == hash(std::string_view{"a"}));
}

TEST_CASE("all 256 single-byte inputs hash to distinct digests") {
  std::set<Digest> seen;
  for (int b = 0; b < 256; ++b) {
    seen.insert(hash(Bytes{static_cast<uint8_t>(b)}));
  }
  CHECK(seen.size() == 256);
}

TEST_CASE("generate_keypair returns fresh handles and keys") {
  PlatFixture fx;
  auto& plat = fx.plat;
  auto a = plat.generate_keypair(ProcessIdentity::kernel());
  auto b = plat.generate_keypair(ProcessIdentity::kernel());
  REQUIRE(a.ok());
  REQUIRE(b.ok());
  CHECK(a.value().first.handle_id != b.value().first.handle_id);
  CHECK(a.value().second != b.value().second);
}

TEST_CASE("handles are bound to their owner process") {
  PlatFixture fx;
  auto& plat = fx.plat;
  ProcessIdentity owner{42, 1042, hash(std::string_view{"bundle:p"})};
  auto kp = plat.generate_keypair(owner);
  REQUIRE(kp.ok());
  CHECK(kp.value().first.owner_binding == owner);

  Bytes msg = to_bytes("hello");
  auto sig = plat.vault_sign(kp.value().first, owner, msg);
  REQUIRE(sig.ok());
  CHECK(verify_signature(kp.value().second, msg, sig.value()));

  ProcessIdentity other{43, 1043, hash(std::string_view{"bundle:q"})};
  auto stolen = plat.vault_sign(kp.value().first, other, msg);
  REQUIRE(!stolen.ok());
  CHECK(stolen.code() == Errc::kCallerMismatch);
}

TEST_CASE("unknown handles are rejected") {
  PlatFixture fx;
  auto& plat = fx.plat;
  KeyHandle bogus;
  bogus.handle_id.fill(0xAB);
  auto res = plat.vault_sign(bogus, ProcessIdentity::kernel(), to_bytes("x"));
  REQUIRE(!res.ok());
  CHECK(res.code() == Errc::kUnknownHandle);
}

TEST_CASE("collision scan over 1000 generated handles") {
  PlatFixture fx;
  auto& plat = fx.plat;
  std::set<TokenId> handles;
  std::set<PublicKey> keys;
  for (int i = 0; i < 1000; ++i) {
    auto kp = plat.generate_keypair(ProcessIdentity::kernel());
    REQUIRE(kp.ok());
    handles.insert(kp.value().first.handle_id);
    keys.insert(kp.value().second);
  }
  CHECK(handles.size() == 1000);
  CHECK(keys.size() == 1000);
}

TEST_CASE("signature round-trip and bit-flip fuzz") {
  PlatFixture fx;
  auto& plat = fx.plat;
  auto kp = plat.generate_keypair(ProcessIdentity::kernel());
  REQUIRE(kp.ok());
  DetRng rng(99);
  Bytes msg = rng.bytes(512);
  auto sig = plat.vault_sign(kp.value().first, ProcessIdentity::kernel(), msg);
  REQUIRE(sig.ok());
  CHECK(verify_signature(kp.value().second, msg, sig.value()));

  for (int i = 0; i < 256; ++i) {
    Bytes mutated = msg;
    size_t pos = rng.u64() % mutated.size();
    uint8_t bit = 1u << (rng.u64() % 8);
    mutated[pos] ^= bit;
    CHECK_FALSE(verify_signature(kp.value().second, mutated, sig.value()));
  }
  for (int i = 0; i < 64; ++i) {
    Signature mutated = sig.value();
    size_t pos = rng.u64() % mutated.size();
    mutated[pos] ^= static_cast<uint8_t>(1u << (rng.u64() % 8));
    CHECK_FALSE(verify_signature(kp.value().second, msg, mutated));
  }
}

TEST_CASE("secure boot succeeds when every stage measures correctly") {
  Platform plat(3);
  auto images = default_boot_images();
  auto outcome = plat.secure_boot(images, measure_images(images));
  CHECK(outcome.state == BootState::Online);
  REQUIRE(outcome.attestation.has_value());
  CHECK(outcome.attestation->measurements.size() == kBootStages.size());
}

TEST_CASE("a one-byte perturbation of any stage latches fail-closed") {
  for (auto stage : kBootStages) {
    Platform plat(4);
    auto images = default_boot_images();
    auto expected = measure_images(images);
    images[std::string{stage}][0] ^= 0x01;
    auto outcome = plat.secure_boot(images, expected);
    CHECK(outcome.state == BootState::FailClosed);
    CHECK_FALSE(outcome.attestation.has_value());

    auto kp = plat.generate_keypair(ProcessIdentity::kernel());
    REQUIRE(!kp.ok());
    CHECK(kp.code() == Errc::kKernelUnavailable);
    auto att = plat.issue_attestation(to_bytes("n"));
    REQUIRE(!att.ok());
    CHECK(att.code() == Errc::kKernelUnavailable);
    auto ds = plat.device_sign(to_bytes("m"));
    REQUIRE(!ds.ok());
    CHECK(ds.code() == Errc::kKernelUnavailable);
  }
}

TEST_CASE("attestation binds measurements, device key and nonce") {
  PlatFixture fx;
  auto& plat = fx.plat;
  Bytes nonce = to_bytes("fresh-nonce");
  auto att = plat.issue_attestation(nonce);
  REQUIRE(att.ok());
  CHECK(verify_attestation(att.value(), nonce, plat.device_attestation_key()));

  // replay under a different nonce
  CHECK_FALSE(verify_attestation(att.value(), to_bytes("other-nonce"),
                                 plat.device_attestation_key()));

  // single-field tamper fuzz over measurement digests
  for (size_t m = 0; m < att.value().measurements.size(); ++m) {
    auto tampered = att.value();
    tampered.measurements[m].digest[0] ^= 0x80;
    CHECK_FALSE(verify_attestation(tampered, nonce, plat.device_attestation_key()));
  }
  auto tampered = att.value();
  tampered.device_key_fingerprint[5] ^= 0x01;
  CHECK_FALSE(verify_attestation(tampered, nonce, plat.device_attestation_key()));
}

TEST_CASE("measurement config file round-trips") {
  auto images = default_boot_images();
  auto expected = measure_images(images);
  std::string rendered = render_measurement_config(expected);
  std::string path = "/tmp/aura_test_measurements.txt";
  {
    std::ofstream out(path);
    out << rendered;
  }
  auto loaded = load_measurement_config(path);
  REQUIRE(loaded.ok());
  CHECK(loaded.value() == expected);
}

TEST_CASE("derived device secrets are stable per label and distinct across labels") {
  Platform a(77);
  Platform b(77);
  CHECK(a.derive_device_secret("audit-at-rest") == b.derive_device_secret("audit-at-rest"));
  CHECK(a.derive_device_secret("audit-at-rest") != a.derive_device_secret("memory-mac"));
}

TEST_CASE("vault operations are safe under concurrent callers") {
  PlatFixture fx;
  auto& plat = fx.plat;
  std::vector<std::thread> threads;
  std::atomic<int> failures{0};
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&plat, &failures] {
      for (int i = 0; i < 50; ++i) {
        auto kp = plat.generate_keypair(ProcessIdentity::kernel());
        if (!kp.ok()) {
          ++failures;
          continue;
        }
        auto sig = plat.vault_sign(kp.value().first, ProcessIdentity::kernel(), to_bytes("m"));
        if (!sig.ok() || !verify_signature(kp.value().second, to_bytes("m"), sig.value())) {
          ++failures;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(failures.load() == 0);
}
