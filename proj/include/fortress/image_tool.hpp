// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Build-time side of trusted board boot: deterministic key generation,
// chain assembly with payload padding, and the on-disk image-set layout
// consumed by the boot command.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fortress/boot.hpp"
#include "fortress/bytes.hpp"
#include "fortress/crypto.hpp"

namespace fortress::image_tool {

/// Private signing seeds for the five signed stages. The public key of each
/// stage's key is embedded in the previous stage's payload; the bootloader
/// key's public half doubles as the fused root key.
struct ChainKeys {
  Bytes bootloader;
  Bytes trusted_firmware;
  Bytes tee_os;
  Bytes device_tree;
  Bytes trusted_app;

  Bytes root_public() const { return crypto::ed25519_public_key(bootloader); }
};

inline ChainKeys deterministic_keys(uint64_t seed) {
  std::mt19937_64 rng(seed);
  ChainKeys keys;
  keys.bootloader = random_bytes(rng, crypto::kEd25519SeedSize);
  keys.trusted_firmware = random_bytes(rng, crypto::kEd25519SeedSize);
  keys.tee_os = random_bytes(rng, crypto::kEd25519SeedSize);
  keys.device_tree = random_bytes(rng, crypto::kEd25519SeedSize);
  keys.trusted_app = random_bytes(rng, crypto::kEd25519SeedSize);
  return keys;
}

/// Stage bodies. The device tree travels as source text; the rest are
/// opaque placeholder blobs.
struct ChainContents {
  Bytes boot_rom;
  Bytes bootloader;
  Bytes trusted_firmware;
  Bytes tee_os;
  std::string dts;
  Bytes trusted_app;
};

inline ChainContents default_contents(std::string dts) {
  auto body = [](const std::string& text) { return Bytes(text.begin(), text.end()); };
  ChainContents c;
  c.boot_rom = body("fortress boot rom model\n");
  c.bootloader = body("fortress bootloader stage body\n");
  c.trusted_firmware = body("fortress trusted firmware stage body\n");
  c.tee_os = body("fortress tee os stage body\n");
  c.dts = std::move(dts);
  c.trusted_app = body("fortress trusted application stage body\n");
  return c;
}

/// Pad DTS text to an exact byte length with a trailing comment; the padded
/// text still parses to the same node list.
inline std::string pad_dts(std::string dts, size_t target) {
  if (dts.size() > target) throw Error("dts exceeds pad size");
  if (dts.size() == target) return dts;
  if (!dts.empty() && dts.back() != '\n' && target - dts.size() >= 1)
    dts.push_back('\n');
  size_t remaining = target - dts.size();
  if (remaining == 1)
    dts += " ";
  else if (remaining >= 2)
    dts += "//" + std::string(remaining - 2, 'p');
  return dts;
}

/// Assemble and sign the full chain. Each payload is
/// [next stage public key (32)] [body], zero-padded (comment-padded for the
/// device tree) to pad_payload_to bytes when nonzero.
inline std::vector<boot::StageImage> build_chain(const ChainKeys& keys,
                                                 const ChainContents& contents,
                                                 size_t pad_payload_to = 1024) {
  using boot::Stage;
  const Bytes zero_key(crypto::kEd25519PublicSize, 0);

  auto payload_of = [&](const Bytes& next_pub, ByteSpan body) {
    Bytes p = next_pub;
    p.insert(p.end(), body.begin(), body.end());
    if (pad_payload_to != 0) {
      if (p.size() > pad_payload_to) throw Error("stage body exceeds pad size");
      p.resize(pad_payload_to, 0);
    }
    return p;
  };

  std::string dts = contents.dts;
  if (pad_payload_to != 0) {
    if (dts.size() + crypto::kEd25519PublicSize > pad_payload_to)
      throw Error("dts body exceeds pad size");
    dts = pad_dts(std::move(dts), pad_payload_to - crypto::kEd25519PublicSize);
  }
  const Bytes dts_body(dts.begin(), dts.end());

  auto make = [&](Stage stage, const std::string& key_id, Bytes payload,
                  const Bytes* signer_seed) {
    boot::StageImage img;
    img.stage = stage;
    img.signer_key_id = key_id;
    img.payload = std::move(payload);
    img.signature = signer_seed != nullptr
                        ? boot::sign_image(img.payload, *signer_seed)
                        : Bytes(boot::kSignatureSize, 0);
    return img;
  };

  std::vector<boot::StageImage> chain;
  chain.push_back(make(Stage::BootRom, "boot-rom",
                       payload_of(crypto::ed25519_public_key(keys.bootloader),
                                  contents.boot_rom),
                       nullptr));
  chain.push_back(make(Stage::Bootloader, "bl-1",
                       payload_of(crypto::ed25519_public_key(keys.trusted_firmware),
                                  contents.bootloader),
                       &keys.bootloader));
  chain.push_back(make(Stage::TrustedFirmware, "tfw-1",
                       payload_of(crypto::ed25519_public_key(keys.tee_os),
                                  contents.trusted_firmware),
                       &keys.trusted_firmware));
  chain.push_back(make(Stage::TeeOs, "teeos-1",
                       payload_of(crypto::ed25519_public_key(keys.device_tree),
                                  contents.tee_os),
                       &keys.tee_os));
  chain.push_back(make(Stage::DeviceTree, "dt-1",
                       payload_of(crypto::ed25519_public_key(keys.trusted_app),
                                  dts_body),
                       &keys.device_tree));
  chain.push_back(make(Stage::TrustedApp, "ta-1", payload_of(zero_key, contents.trusted_app),
                       &keys.trusted_app));
  return chain;
}

inline std::string image_filename(boot::Stage stage) {
  switch (stage) {
    case boot::Stage::BootRom: return "bootrom.fimg";
    case boot::Stage::Bootloader: return "bootloader.fimg";
    case boot::Stage::TrustedFirmware: return "trusted_firmware.fimg";
    case boot::Stage::TeeOs: return "tee_os.fimg";
    case boot::Stage::DeviceTree: return "device_tree.fimg";
    case boot::Stage::TrustedApp: return "trusted_app.fimg";
  }
  return "unknown.fimg";
}

inline constexpr const char* kRootKeyFile = "root_key.pub";

inline void write_chain(const std::filesystem::path& dir,
                        const std::vector<boot::StageImage>& chain,
                        ByteSpan root_public) {
  std::filesystem::create_directories(dir);
  for (const auto& img : chain)
    boot::write_image_file(dir / image_filename(img.stage), img);
  write_file(dir / kRootKeyFile, root_public);
}

inline std::vector<boot::StageImage> read_chain(const std::filesystem::path& dir) {
  std::vector<boot::StageImage> chain;
  for (boot::Stage stage : boot::kStageOrder)
    chain.push_back(boot::read_image_file(dir / image_filename(stage)));
  return chain;
}

inline Bytes read_root_key(const std::filesystem::path& dir) {
  return read_file(dir / kRootKeyFile);
}

}  // namespace fortress::image_tool
