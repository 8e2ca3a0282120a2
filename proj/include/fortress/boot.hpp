// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Trusted board boot: a staged chain of trust rooted in an unsigned boot
// ROM. Every payload embeds the public key of the next stage in its first
// 32 bytes; each stage's signature is Ed25519 over the SHA-256 digest of
// its payload. A fully verified chain yields the parsed device tree and the
// TZASC secure-region configuration derived from it.

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fortress/bytes.hpp"
#include "fortress/crypto.hpp"
#include "fortress/devtree.hpp"
#include "fortress/errors.hpp"
#include "fortress/mem_fabric.hpp"

namespace fortress::boot {

enum class Stage : uint8_t {
  BootRom = 0,
  Bootloader = 1,
  TrustedFirmware = 2,
  TeeOs = 3,
  DeviceTree = 4,
  TrustedApp = 5,
};

inline constexpr std::array<Stage, 6> kStageOrder = {
    Stage::BootRom,  Stage::Bootloader, Stage::TrustedFirmware,
    Stage::TeeOs,    Stage::DeviceTree, Stage::TrustedApp,
};

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::BootRom: return "BootRom";
    case Stage::Bootloader: return "Bootloader";
    case Stage::TrustedFirmware: return "TrustedFirmware";
    case Stage::TeeOs: return "TeeOs";
    case Stage::DeviceTree: return "DeviceTree";
    case Stage::TrustedApp: return "TrustedApp";
  }
  return "?";
}

/// Byte offset where a payload's embedded next-stage public key lives.
inline constexpr size_t kEmbeddedKeySize = crypto::kEd25519PublicSize;

struct StageImage {
  Stage stage = Stage::BootRom;
  std::string signer_key_id;
  Bytes payload;
  Bytes signature;  // 64 bytes; all-zero for the unsigned boot ROM

  /// The next stage's public key, embedded at the head of the payload.
  Bytes embedded_key() const {
    if (payload.size() < kEmbeddedKeySize)
      throw MalformedImage("payload too short for embedded key");
    return Bytes(payload.begin(), payload.begin() + kEmbeddedKeySize);
  }

  /// Payload content past the embedded key (stage body, DTS text, ...).
  Bytes content() const {
    if (payload.size() < kEmbeddedKeySize)
      throw MalformedImage("payload too short for embedded key");
    return Bytes(payload.begin() + kEmbeddedKeySize, payload.end());
  }
};

struct BootReport {
  std::vector<Stage> verified;
  std::optional<Stage> failed_stage;
  std::string failure_detail;
  std::vector<std::pair<uint64_t, uint64_t>> configured_regions;
  std::vector<devtree::DeviceNode> dt_nodes;

  bool success() const {
    return !failed_stage.has_value() && verified.size() == kStageOrder.size();
  }
};

/// Possession of a successful report is the capability to construct the
/// trusted driver.
using BootToken = std::shared_ptr<const BootReport>;

inline Bytes sign_image(ByteSpan payload, ByteSpan private_key) {
  crypto::Digest digest = crypto::sha256(payload);
  return crypto::ed25519_sign(private_key, digest);
}

/// Throws IntegrityError unless image.signature validates over
/// SHA-256(image.payload) under public_key.
inline void verify_stage(const StageImage& image, ByteSpan public_key) {
  crypto::Digest digest = crypto::sha256(image.payload);
  if (!crypto::ed25519_verify(public_key, digest, image.signature))
    throw IntegrityError(to_string(image.stage),
                         "signature does not match payload digest " +
                             to_hex(digest));
}

/// Run the chain of trust. Never throws for tamper; failures land in the
/// report. The root public key models the key fused next to the boot ROM
/// and must match the ROM image's embedded key. On full success the
/// verified device tree is parsed and its secure regions are programmed
/// into the fabric with firmware privileges.
inline BootToken boot_chain(const std::vector<StageImage>& stages,
                            ByteSpan root_public_key, MemFabric& fabric) {
  if (stages.size() != kStageOrder.size())
    throw MalformedImage("boot chain needs exactly " +
                         std::to_string(kStageOrder.size()) + " stages");
  for (size_t i = 0; i < stages.size(); ++i)
    if (stages[i].stage != kStageOrder[i])
      throw MalformedImage("stage " + std::to_string(i) + " out of order");

  auto report = std::make_shared<BootReport>();
  const StageImage& rom = stages[0];
  Bytes rom_key = rom.embedded_key();
  if (rom_key.size() != root_public_key.size() ||
      !std::equal(rom_key.begin(), rom_key.end(), root_public_key.begin())) {
    report->failed_stage = Stage::BootRom;
    report->failure_detail = "boot ROM embedded key does not match root key";
    return report;
  }
  report->verified.push_back(Stage::BootRom);

  for (size_t i = 1; i < stages.size(); ++i) {
    Bytes key = stages[i - 1].embedded_key();
    try {
      verify_stage(stages[i], key);
    } catch (const IntegrityError& e) {
      report->failed_stage = stages[i].stage;
      report->failure_detail = e.what();
      return report;
    }
    report->verified.push_back(stages[i].stage);
  }

  const StageImage& dt = stages[static_cast<size_t>(Stage::DeviceTree)];
  Bytes dts = dt.content();
  report->dt_nodes = devtree::parse(std::string(dts.begin(), dts.end()));

  FirmwareSection fw(fabric.ctx());
  for (const auto& [base, size] : devtree::secure_regions(report->dt_nodes)) {
    fabric.configure_secure_region(base, size);
    report->configured_regions.emplace_back(base, size);
  }
  return report;
}

// ------------------------------------------------------------- container

inline constexpr char kImageMagic[4] = {'F', 'I', 'M', 'G'};
inline constexpr size_t kSignatureSize = crypto::kEd25519SigSize;

/// FIMG: magic | stage u8 | key_id_len u8 | key_id | payload_len u32 BE |
/// payload | signature(64).
inline Bytes encode_image(const StageImage& image) {
  if (image.signer_key_id.size() > 255)
    throw MalformedImage("key id longer than 255 bytes");
  if (image.signature.size() != kSignatureSize)
    throw MalformedImage("signature must be exactly 64 bytes");
  Bytes out;
  out.insert(out.end(), kImageMagic, kImageMagic + 4);
  out.push_back(static_cast<uint8_t>(image.stage));
  out.push_back(static_cast<uint8_t>(image.signer_key_id.size()));
  out.insert(out.end(), image.signer_key_id.begin(), image.signer_key_id.end());
  put_u32_be(out, static_cast<uint32_t>(image.payload.size()));
  out.insert(out.end(), image.payload.begin(), image.payload.end());
  out.insert(out.end(), image.signature.begin(), image.signature.end());
  return out;
}

inline StageImage decode_image(ByteSpan raw) {
  size_t pos = 0;
  auto need = [&](size_t n) {
    if (raw.size() - pos < n) throw MalformedImage("truncated FIMG container");
  };
  need(6);
  if (!std::equal(kImageMagic, kImageMagic + 4, raw.begin()))
    throw MalformedImage("bad FIMG magic");
  pos = 4;
  uint8_t stage_byte = raw[pos++];
  if (stage_byte >= kStageOrder.size())
    throw MalformedImage("unknown stage byte " + std::to_string(stage_byte));
  uint8_t key_id_len = raw[pos++];
  need(key_id_len);
  std::string key_id(raw.begin() + pos, raw.begin() + pos + key_id_len);
  pos += key_id_len;
  need(4);
  uint32_t payload_len = get_u32_be(raw.subspan(pos));
  pos += 4;
  need(payload_len);
  Bytes payload(raw.begin() + pos, raw.begin() + pos + payload_len);
  pos += payload_len;
  need(kSignatureSize);
  Bytes signature(raw.begin() + pos, raw.begin() + pos + kSignatureSize);
  pos += kSignatureSize;
  if (pos != raw.size()) throw MalformedImage("trailing bytes after signature");
  StageImage image;
  image.stage = static_cast<Stage>(stage_byte);
  image.signer_key_id = std::move(key_id);
  image.payload = std::move(payload);
  image.signature = std::move(signature);
  return image;
}

inline void write_image_file(const std::filesystem::path& path,
                             const StageImage& image) {
  write_file(path, encode_image(image));
}

inline StageImage read_image_file(const std::filesystem::path& path) {
  return decode_image(read_file(path));
}

}  // namespace fortress::boot
