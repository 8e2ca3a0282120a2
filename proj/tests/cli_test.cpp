// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

// Black-box tests over the installed binaries: exit codes, report schemas
// and the payload files the record pipeline leaves behind.

#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <fortress/bytes.hpp>
#include <fortress/crypto.hpp>
#include <fortress/pcm.hpp>
#include <fortress/platform.hpp>
#include <fortress/tee_rt.hpp>

#include "support/schema_check.hpp"
#include "support/tmpdir.hpp"

#include <cstdio>
#include <filesystem>
#include <string>
#include <sys/wait.h>

using namespace fortress;
using fortress::test_support::TmpDir;
using nlohmann::json;

namespace {

const std::string kCli = FORTRESS_CLI_PATH;
const std::string kMkimages = MKIMAGES_PATH;
const std::filesystem::path kFixtureDir =
    std::filesystem::path(FORTRESS_REPO_DIR) / "fixtures";

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run(const std::string& cmd) {
  RunResult r;
  FILE* pipe = ::popen((cmd + " 2>&1").c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  size_t n;
  while ((n = ::fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

/// mkimages + boot --out, asserting success; returns the state file path.
std::filesystem::path boot_state(const TmpDir& tmp) {
  auto images = tmp.path() / "images";
  auto state = tmp.path() / "state.json";
  REQUIRE(run(kMkimages + " --out " + q(images)).exit_code == 0);
  auto boot = run(kCli + " boot --images " + q(images) + " --out " + q(state));
  REQUIRE(boot.exit_code == 0);
  return state;
}

void check_schema(const char* name, const json& value) {
  json schema = json::parse(read_text_file(
      std::filesystem::path(FORTRESS_REPO_DIR) / "schemas" /
      (std::string(name) + ".schema.json")));
  std::string error;
  bool ok = test_support::validate_schema(schema, value, &error);
  INFO(name << " schema: " << error);
  CHECK(ok);
}

crypto::AesKey payload_key() {
  Bytes msg{0x01};
  const std::string context = "payload";
  msg.insert(msg.end(), context.begin(), context.end());
  auto huk = platform::default_huk();
  auto mac = crypto::hmac_sha256(Bytes(huk.begin(), huk.end()), msg);
  crypto::AesKey key{};
  std::copy(mac.begin(), mac.begin() + 16, key.begin());
  return key;
}

}  // namespace

TEST_CASE("mkimages and boot produce a verified state file") {
  TmpDir tmp;
  auto images = tmp.path() / "images";
  auto mk = run(kMkimages + " --out " + q(images));
  REQUIRE(mk.exit_code == 0);
  for (const char* name : {"bootrom.fimg", "bootloader.fimg",
                           "trusted_firmware.fimg", "tee_os.fimg",
                           "device_tree.fimg", "trusted_app.fimg",
                           "root_key.pub"})
    CHECK(std::filesystem::exists(images / name));

  auto state = tmp.path() / "state.json";
  auto boot = run(kCli + " boot --images " + q(images) + " --out " + q(state));
  REQUIRE(boot.exit_code == 0);

  json report = json::parse(boot.out);
  check_schema("boot_report", report);
  CHECK(report.at("success") == true);
  CHECK(report.at("verified_stages") ==
        json::array({"BootRom", "Bootloader", "TrustedFirmware", "TeeOs",
                     "DeviceTree", "TrustedApp"}));
  REQUIRE(report.at("configured_regions").size() == 1);
  CHECK(report.at("configured_regions")[0].at("base") == 0x2901000);
  CHECK(report.at("configured_regions")[0].at("size") == 0x100);
  CHECK(report.at("dt_nodes")[0].at("name") == "i2s@2901000");
  CHECK_FALSE(report.contains("failed_stage"));

  CHECK(json::parse(read_text_file(state)) == report);
}

TEST_CASE("boot cross-checks the device tree on request") {
  TmpDir tmp;
  auto images = tmp.path() / "images";
  REQUIRE(run(kMkimages + " --out " + q(images)).exit_code == 0);

  auto good_dts = tmp.path() / "board.dts";
  write_text_file(good_dts, platform::default_dts());
  auto match = run(kCli + " boot --images " + q(images) + " --dt " + q(good_dts));
  CHECK(match.exit_code == 0);
  CHECK(json::parse(match.out).at("dt_cross_check") == "match");

  auto bad_dts = tmp.path() / "other.dts";
  write_text_file(bad_dts,
                  "i2s@2905000 {\n"
                  "    compatible = \"nvidia,tegra194-i2s\";\n"
                  "    reg = <0x0 0x2905000 0x0 0x100>;\n"
                  "    status = \"okay\";\n"
                  "    secure-status = \"secure\";\n"
                  "};\n");
  auto mismatch = run(kCli + " boot --images " + q(images) + " --dt " + q(bad_dts));
  CHECK(mismatch.exit_code == 1);
  CHECK(json::parse(mismatch.out).at("dt_cross_check") == "mismatch");

  auto absent = run(kCli + " boot --images " + q(images) + " --dt " +
                    q(tmp.path() / "nope.dts"));
  CHECK(absent.exit_code == 2);
}

TEST_CASE("a tampered image makes boot fail at its stage with exit 1") {
  TmpDir tmp;
  auto images = tmp.path() / "images";
  REQUIRE(run(kMkimages + " --out " + q(images)).exit_code == 0);

  // FIMG header for tee_os: magic(4) stage(1) idlen(1) "teeos-1"(7) len(4).
  auto target = images / "tee_os.fimg";
  Bytes raw = read_file(target);
  raw[17 + 100] ^= 0x01;
  write_file(target, raw);

  auto boot = run(kCli + " boot --images " + q(images));
  CHECK(boot.exit_code == 1);
  json report = json::parse(boot.out);
  CHECK(report.at("success") == false);
  CHECK(report.at("failed_stage") == "TeeOs");
  CHECK(report.at("verified_stages") ==
        json::array({"BootRom", "Bootloader", "TrustedFirmware"}));
  CHECK(report.at("configured_regions").empty());
}

TEST_CASE("boot reports missing inputs as I/O errors") {
  TmpDir tmp;
  CHECK(run(kCli + " boot --images " + q(tmp.path() / "void")).exit_code == 2);
}

TEST_CASE("record encrypts a capture the TEE key can open") {
  TmpDir tmp;
  auto state = boot_state(tmp);
  auto payload_path = tmp.path() / "payload.bin";
  auto fixture = pcm::load(kFixtureDir / "sample.pcm");

  auto rec = run(kCli + " --json record --state " + q(state) + " --pcm " +
                 q(kFixtureDir / "sample.pcm") + " --policy gcm --out " +
                 q(payload_path));
  REQUIRE(rec.exit_code == 0);

  json report = json::parse(rec.out);
  check_schema("record_result", report);
  CHECK(report.at("mode") == "gcm");
  CHECK(report.at("capture_bytes") == fixture.samples.size() * 4);
  CHECK(report.at("relayed") == false);
  CHECK(report.at("work").at("total_units").get<uint64_t>() > 0);

  Bytes wire = read_file(payload_path);
  CHECK(report.at("payload_bytes") == wire.size());
  CHECK(report.at("payload_sha256") == to_hex(crypto::sha256(wire)));

  // The payload opens only with the HUK-derived secure-world key.
  tee::ObfuscatedPayload payload = tee::parse_payload(wire);
  CHECK(payload.mode == tee::ObfMode::AesGcm);
  auto plain = crypto::aes128_gcm_decrypt(payload_key(), payload.nonce,
                                          payload.body, payload.tag);
  REQUIRE(plain.has_value());
  CHECK(*plain == pcm::expected_capture(fixture, fixture.samples.size()));
}

TEST_CASE("record text output summarizes the run") {
  TmpDir tmp;
  auto state = boot_state(tmp);
  auto rec = run(kCli + " record --state " + q(state) + " --pcm " +
                 q(kFixtureDir / "sample.pcm") + " --policy gcm");
  REQUIRE(rec.exit_code == 0);
  CHECK(rec.out == "recorded 1024 bytes via mmio, payload 1057 bytes (gcm)\n");
}

TEST_CASE("dma and mmio records carry the same plaintext") {
  TmpDir tmp;
  auto state = boot_state(tmp);
  auto fixture = pcm::load(kFixtureDir / "sample.pcm");

  Bytes captures[2];
  int i = 0;
  for (const char* path : {"mmio", "dma"}) {
    auto out = tmp.path() / (std::string(path) + ".bin");
    auto rec = run(kCli + " record --state " + q(state) + " --pcm " +
                   q(kFixtureDir / "sample.pcm") + " --policy ctr --path " +
                   path + " --out " + q(out));
    REQUIRE(rec.exit_code == 0);
    tee::ObfuscatedPayload p = tee::parse_payload(read_file(out));
    captures[i++] =
        crypto::aes128_ctr(false, payload_key(), p.nonce, p.body);
  }
  CHECK(captures[0] == captures[1]);
  CHECK(captures[0] == pcm::expected_capture(fixture, fixture.samples.size()));
}

TEST_CASE("record validates its inputs") {
  TmpDir tmp;
  auto state = boot_state(tmp);

  SECTION("a failed boot state is refused") {
    auto bad_state = tmp.path() / "bad.json";
    write_text_file(bad_state, "{\"success\": false}\n");
    CHECK(run(kCli + " record --state " + q(bad_state) + " --pcm " +
              q(kFixtureDir / "sample.pcm"))
              .exit_code == 1);
  }
  SECTION("a missing fixture is an I/O error") {
    CHECK(run(kCli + " record --state " + q(state) + " --pcm " +
              q(tmp.path() / "none.pcm"))
              .exit_code == 2);
  }
  SECTION("an unknown policy never starts the pipeline") {
    CHECK(run(kCli + " record --state " + q(state) + " --pcm " +
              q(kFixtureDir / "sample.pcm") + " --policy rot13")
              .exit_code == 2);
  }
}

TEST_CASE("bench reports carry the measured shape") {
  SECTION("copy ladder") {
    auto r = run(kCli + " --json bench --scenario copy");
    REQUIRE(r.exit_code == 0);
    check_schema("bench_report", json::parse(r.out));
    json s = json::parse(r.out).at("scenarios")[0];
    CHECK(s.at("scenario") == "copy");
    CHECK(s.at("strictly_ordered") == true);
    REQUIRE(s.at("samples").size() == 6);
    for (const auto& sample : s.at("samples")) {
      uint64_t n = sample.at("size").get<uint64_t>();
      CHECK(sample.at("memcpy_units") == n + 2);
      CHECK(sample.at("copy_to_user_units") == n + 3);
      CHECK(sample.at("invoke_units") == 2 * n + 4);
    }
    CHECK(s.at("samples")[0].at("size") == 64);
    CHECK(s.at("samples")[5].at("size") == 65536);
  }
  SECTION("mmio parity") {
    auto r = run(kCli + " --json bench --scenario mmio");
    REQUIRE(r.exit_code == 0);
    json s = json::parse(r.out).at("scenarios")[0];
    CHECK(s.at("equal") == true);
    CHECK(s.at("normal_work") == s.at("secure_work"));
    CHECK(s.at("derived_ratios").at("secure_over_normal_units") == 1.0);
  }
  SECTION("crypto timing") {
    auto r = run(kCli + " --json bench --scenario crypto --iters 3");
    REQUIRE(r.exit_code == 0);
    json s = json::parse(r.out).at("scenarios")[0];
    CHECK(s.at("iterations") == 3);
    for (const char* k : {"ecb_encrypt", "cbc_encrypt", "ctr_encrypt",
                          "gcm_encrypt", "gcm_decrypt"})
      CHECK(s.at("wall_ms").at(k).get<double>() > 0.0);
    CHECK(s.at("derived_ratios").contains("gcm_over_ctr_encrypt"));
  }
  SECTION("text output mentions each scenario") {
    auto r = run(kCli + " bench --scenario mmio");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("mmio parity: equal") != std::string::npos);
  }
}

TEST_CASE("tcb reproduces the accounting split") {
  auto csv = q(kFixtureDir / "tcb_i2s.csv");

  auto text = run(kCli + " tcb --csv " + csv);
  REQUIRE(text.exit_code == 0);
  CHECK(text.out.find("66.82") != std::string::npos);
  CHECK(text.out.find("33.18") != std::string::npos);
  CHECK(text.out.find("Total") != std::string::npos);

  auto js = run(kCli + " --json tcb --csv " + csv);
  REQUIRE(js.exit_code == 0);
  json report = json::parse(js.out);
  check_schema("tcb_report", report);
  CHECK(report.at("total_trusted_pct").get<double>() ==
        Catch::Approx(66.82).margin(1e-9));
  CHECK(report.at("total_untrusted_pct").get<double>() ==
        Catch::Approx(33.18).margin(1e-9));
  CHECK(report.at("rows").size() > 3);

  auto missing = run(kCli + " tcb --csv " + q("nonexistent.csv"));
  CHECK(missing.exit_code == 2);
}

TEST_CASE("the cloud subcommand stores a relayed record") {
  TmpDir tmp;
  auto state = boot_state(tmp);
  auto store = tmp.path() / "store";

  FILE* cloud = ::popen((kCli + " cloud --store " + q(store) +
                         " --duration-ms 8000 2>&1")
                            .c_str(),
                        "r");
  REQUIRE(cloud != nullptr);
  char line[256] = {0};
  REQUIRE(::fgets(line, sizeof(line), cloud) != nullptr);
  int port = 0;
  REQUIRE(std::sscanf(line, "cloud listening on 127.0.0.1:%d", &port) == 1);
  REQUIRE(port > 0);

  auto out = tmp.path() / "payload.bin";
  auto rec = run(kCli + " record --state " + q(state) + " --pcm " +
                 q(kFixtureDir / "sample.pcm") + " --policy gcm --out " +
                 q(out) + " --cloud 127.0.0.1:" + std::to_string(port));
  CHECK(rec.exit_code == 0);
  CHECK(rec.out.find("acked 1057") != std::string::npos);

  std::string rest;
  while (::fgets(line, sizeof(line), cloud) != nullptr) rest += line;
  int status = ::pclose(cloud);
  CHECK(WIFEXITED(status));
  CHECK(rest.find("cloud stored 1 payloads") != std::string::npos);
  CHECK(read_file(store / "0") == read_file(out));
}

TEST_CASE("usage errors exit with the I/O code") {
  CHECK(run(kCli).exit_code == 2);
  CHECK(run(kCli + " boot").exit_code == 2);
  CHECK(run(kCli + " --help").exit_code == 0);
  CHECK(run(kCli + " record --state x --pcm y --path teleport").exit_code == 2);
}
