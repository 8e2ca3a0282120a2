// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <fortress/boot.hpp>
#include <fortress/bytes.hpp>
#include <fortress/crypto.hpp>
#include <fortress/image_tool.hpp>
#include <fortress/mem_fabric.hpp>
#include <fortress/platform.hpp>
#include <fortress/soc_state.hpp>

#include "support/tmpdir.hpp"
#include "support/vectors.hpp"

#include <algorithm>
#include <string>
#include <vector>

using namespace fortress;
namespace tv = fortress::test_vectors;

namespace {

Bytes hex(const char* s) { return from_hex(s); }

constexpr size_t kDefaultFlipOffset = 100;

std::vector<boot::StageImage> fixture_chain() {
  auto keys = image_tool::deterministic_keys(7);
  return image_tool::build_chain(keys,
                                 image_tool::default_contents(platform::default_dts()));
}

}  // namespace

TEST_CASE("sha256 matches the published test values") {
  CHECK(to_hex(crypto::sha256(Bytes{})) == tv::kSha256Empty);
  Bytes abc{'a', 'b', 'c'};
  CHECK(to_hex(crypto::sha256(abc)) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("ed25519 matches the published test key") {
  Bytes seed = hex(tv::kEd25519Seed);
  CHECK(to_hex(crypto::ed25519_public_key(seed)) == tv::kEd25519Pub);

  SECTION("signature over the empty message, straight from the standard") {
    Bytes sig = crypto::ed25519_sign(seed, Bytes{});
    CHECK(to_hex(sig) ==
          "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e06522490155"
          "5fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b");
    CHECK(crypto::ed25519_verify(hex(tv::kEd25519Pub), Bytes{}, sig));
  }

  SECTION("verification rejects a perturbed message or signature") {
    Bytes msg{1, 2, 3};
    Bytes sig = crypto::ed25519_sign(seed, msg);
    REQUIRE(crypto::ed25519_verify(hex(tv::kEd25519Pub), msg, sig));
    Bytes bad_msg = msg;
    bad_msg[0] ^= 1;
    CHECK_FALSE(crypto::ed25519_verify(hex(tv::kEd25519Pub), bad_msg, sig));
    Bytes bad_sig = sig;
    bad_sig[10] ^= 1;
    CHECK_FALSE(crypto::ed25519_verify(hex(tv::kEd25519Pub), msg, bad_sig));
  }
}

TEST_CASE("sign_image signs the payload digest") {
  Bytes seed = hex(tv::kEd25519Seed);
  Bytes sig = boot::sign_image(Bytes{}, seed);
  CHECK(to_hex(sig) == tv::kSigEmptyPayload);

  boot::StageImage img;
  img.stage = boot::Stage::Bootloader;
  img.payload = Bytes(64, 0xAB);
  img.signature = boot::sign_image(img.payload, seed);
  CHECK_NOTHROW(boot::verify_stage(img, hex(tv::kEd25519Pub)));

  SECTION("payload tamper is an integrity error naming the stage") {
    img.payload[3] ^= 0x80;
    try {
      boot::verify_stage(img, hex(tv::kEd25519Pub));
      FAIL("tampered stage verified");
    } catch (const IntegrityError& e) {
      CHECK(e.stage == "Bootloader");
    }
  }

  SECTION("signature tamper is also caught") {
    img.signature[0] ^= 1;
    CHECK_THROWS_AS(boot::verify_stage(img, hex(tv::kEd25519Pub)),
                    IntegrityError);
  }
}

TEST_CASE("build_chain emits a well-formed six-stage chain") {
  auto keys = image_tool::deterministic_keys(7);
  auto chain = image_tool::build_chain(
      keys, image_tool::default_contents(platform::default_dts()));

  REQUIRE(chain.size() == 6);
  for (size_t i = 0; i < chain.size(); ++i) {
    CHECK(chain[i].stage == boot::kStageOrder[i]);
    CHECK(chain[i].payload.size() == 1024);
  }
  CHECK(chain[0].signature == Bytes(boot::kSignatureSize, 0));

  CHECK(chain[0].embedded_key() == crypto::ed25519_public_key(keys.bootloader));
  CHECK(chain[1].embedded_key() ==
        crypto::ed25519_public_key(keys.trusted_firmware));
  CHECK(chain[4].embedded_key() ==
        crypto::ed25519_public_key(keys.trusted_app));

  for (size_t i = 1; i < chain.size(); ++i)
    CHECK_NOTHROW(boot::verify_stage(chain[i], chain[i - 1].embedded_key()));

  SECTION("the padded device tree still parses to the board node") {
    Bytes dts = chain[4].content();
    auto nodes = devtree::parse(std::string(dts.begin(), dts.end()));
    REQUIRE(nodes.size() == 1);
    CHECK(nodes[0].name == "i2s@2901000");
  }
}

TEST_CASE("a pristine chain boots and programs the TZASC from the DT") {
  ProcessorContext ctx;
  MemFabric fabric(ctx);
  auto keys = image_tool::deterministic_keys(7);
  auto chain = fixture_chain();

  boot::BootToken token = boot::boot_chain(chain, keys.root_public(), fabric);

  REQUIRE(token->success());
  CHECK(token->verified ==
        std::vector<boot::Stage>(boot::kStageOrder.begin(),
                                 boot::kStageOrder.end()));
  CHECK(token->configured_regions ==
        std::vector<std::pair<uint64_t, uint64_t>>{{0x2901000, 0x100}});
  CHECK(fabric.secure_region_list() ==
        std::vector<std::pair<uint64_t, uint64_t>>{{0x2901000, 0x100}});
  REQUIRE(token->dt_nodes.size() == 1);
  CHECK(token->dt_nodes[0].name == "i2s@2901000");

  CHECK(ctx.world() == World::Normal);
  CHECK(ctx.el() == El::El1);
}

TEST_CASE("a wrong fused root key fails at the boot ROM") {
  ProcessorContext ctx;
  MemFabric fabric(ctx);
  auto chain = fixture_chain();
  Bytes wrong_root(crypto::kEd25519PublicSize, 0x42);

  auto token = boot::boot_chain(chain, wrong_root, fabric);
  CHECK_FALSE(token->success());
  REQUIRE(token->failed_stage.has_value());
  CHECK(*token->failed_stage == boot::Stage::BootRom);
  CHECK(token->configured_regions.empty());
  CHECK(fabric.secure_region_list().empty());
}

TEST_CASE("single-byte tamper fails at exactly the tampered stage") {
  auto keys = image_tool::deterministic_keys(7);
  auto pristine = fixture_chain();

  for (size_t s = 1; s < pristine.size(); ++s) {
    DYNAMIC_SECTION("stage " << boot::to_string(pristine[s].stage)) {
      ProcessorContext ctx;
      MemFabric fabric(ctx);
      auto chain = pristine;
      chain[s].payload[kDefaultFlipOffset] ^= 0x01;

      auto token = boot::boot_chain(chain, keys.root_public(), fabric);
      CHECK_FALSE(token->success());
      REQUIRE(token->failed_stage.has_value());
      CHECK(*token->failed_stage == pristine[s].stage);
      CHECK(token->verified.size() == s);
      CHECK(fabric.secure_region_list().empty());
    }
  }
}

TEST_CASE("signature tamper also pins the failure to its stage") {
  auto keys = image_tool::deterministic_keys(7);
  auto chain = fixture_chain();
  chain[3].signature[17] ^= 0xFF;

  ProcessorContext ctx;
  MemFabric fabric(ctx);
  auto token = boot::boot_chain(chain, keys.root_public(), fabric);
  REQUIRE(token->failed_stage.has_value());
  CHECK(*token->failed_stage == boot::Stage::TeeOs);
  CHECK(token->verified ==
        std::vector<boot::Stage>{boot::Stage::BootRom, boot::Stage::Bootloader,
                                 boot::Stage::TrustedFirmware});
}

TEST_CASE("malformed chains are rejected outright") {
  ProcessorContext ctx;
  MemFabric fabric(ctx);
  auto keys = image_tool::deterministic_keys(7);
  auto chain = fixture_chain();

  auto shorter = chain;
  shorter.pop_back();
  CHECK_THROWS_AS(boot::boot_chain(shorter, keys.root_public(), fabric),
                  MalformedImage);

  auto swapped = chain;
  std::swap(swapped[1], swapped[2]);
  CHECK_THROWS_AS(boot::boot_chain(swapped, keys.root_public(), fabric),
                  MalformedImage);
}

TEST_CASE("FIMG containers round-trip and reject damage") {
  auto chain = fixture_chain();
  const boot::StageImage& img = chain[2];

  Bytes raw = boot::encode_image(img);
  boot::StageImage back = boot::decode_image(raw);
  CHECK(back.stage == img.stage);
  CHECK(back.signer_key_id == img.signer_key_id);
  CHECK(back.payload == img.payload);
  CHECK(back.signature == img.signature);

  SECTION("bad magic") {
    raw[0] = 'X';
    CHECK_THROWS_AS(boot::decode_image(raw), MalformedImage);
  }
  SECTION("unknown stage byte") {
    raw[4] = 9;
    CHECK_THROWS_AS(boot::decode_image(raw), MalformedImage);
  }
  SECTION("truncated container") {
    raw.resize(raw.size() - 1);
    CHECK_THROWS_AS(boot::decode_image(raw), MalformedImage);
  }
  SECTION("trailing bytes") {
    raw.push_back(0);
    CHECK_THROWS_AS(boot::decode_image(raw), MalformedImage);
  }
  SECTION("payload length pointing past the end") {
    // Corrupt the big-endian payload length field.
    size_t len_off = 4 + 1 + 1 + img.signer_key_id.size();
    raw[len_off] = 0xFF;
    CHECK_THROWS_AS(boot::decode_image(raw), MalformedImage);
  }
}

TEST_CASE("encode_image validates its inputs") {
  boot::StageImage img;
  img.payload = Bytes(40, 1);
  img.signature = Bytes(10, 0);
  CHECK_THROWS_AS(boot::encode_image(img), MalformedImage);
  img.signature = Bytes(boot::kSignatureSize, 0);
  img.signer_key_id = std::string(300, 'k');
  CHECK_THROWS_AS(boot::encode_image(img), MalformedImage);
}

TEST_CASE("image tooling is deterministic") {
  auto a = image_tool::deterministic_keys(7);
  auto b = image_tool::deterministic_keys(7);
  CHECK(a.bootloader == b.bootloader);
  CHECK(a.trusted_app == b.trusted_app);
  CHECK(a.root_public() == b.root_public());
  CHECK(image_tool::deterministic_keys(8).bootloader != a.bootloader);

  auto chain_a = fixture_chain();
  auto chain_b = fixture_chain();
  for (size_t i = 0; i < chain_a.size(); ++i)
    CHECK(boot::encode_image(chain_a[i]) == boot::encode_image(chain_b[i]));
}

TEST_CASE("chains survive the on-disk image-set layout") {
  test_support::TmpDir dir;
  auto keys = image_tool::deterministic_keys(7);
  auto chain = fixture_chain();

  image_tool::write_chain(dir.path(), chain, keys.root_public());
  CHECK(image_tool::read_root_key(dir.path()) == keys.root_public());

  auto back = image_tool::read_chain(dir.path());
  REQUIRE(back.size() == chain.size());
  for (size_t i = 0; i < chain.size(); ++i) {
    CHECK(back[i].stage == chain[i].stage);
    CHECK(back[i].payload == chain[i].payload);
    CHECK(back[i].signature == chain[i].signature);
  }

  ProcessorContext ctx;
  MemFabric fabric(ctx);
  auto token = boot::boot_chain(back, image_tool::read_root_key(dir.path()),
                                fabric);
  CHECK(token->success());
}

TEST_CASE("pad_dts preserves the parse while hitting the target size") {
  std::string dts = platform::default_dts();
  auto before = devtree::parse(dts);
  std::string padded = image_tool::pad_dts(dts, 992);
  CHECK(padded.size() == 992);
  CHECK(devtree::parse(padded) == before);
  CHECK_THROWS_AS(image_tool::pad_dts(std::string(2000, 'x'), 100), Error);
}
