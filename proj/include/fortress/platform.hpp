// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Board assembly: the processor, fabric, I2S device, clock/power block and
// the secure software stack wired together under one fixed memory map.
//
//   0x02901000 +0x100     I2S MMIO window (TZASC-protected at boot)
//   0x02902000 +0x100     clock/power block (normal-world writable)
//   0x02903000 +0x100     scratch MMIO bank for benches
//   0x30000000 +0x200000  TEE RAM (secured at TEE init; capture buffer lives here)
//   0x30200000 +0x100000  TA private RAM (secured at TEE init)
//   0x40000000 ...        normal-world kernel / user / shared memory, unpoliced

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "fortress/boot.hpp"
#include "fortress/devtree.hpp"
#include "fortress/drivers.hpp"
#include "fortress/i2s_dev.hpp"
#include "fortress/image_tool.hpp"
#include "fortress/mem_fabric.hpp"
#include "fortress/soc_state.hpp"
#include "fortress/tee_rt.hpp"

namespace fortress::platform {

inline constexpr uint64_t kI2sBase = 0x2901000;
inline constexpr uint64_t kI2sWindow = 0x100;
inline constexpr uint64_t kClockBase = 0x2902000;
inline constexpr uint64_t kClockWindow = 0x100;
inline constexpr uint64_t kScratchBase = 0x2903000;
inline constexpr uint64_t kScratchWindow = 0x100;
inline constexpr uint64_t kTeeRamBase = 0x30000000;
inline constexpr uint64_t kTeeRamSize = 0x200000;
inline constexpr uint64_t kCaptureBufBase = 0x30100000;
inline constexpr uint64_t kCaptureBufSize = 0x10000;
inline constexpr uint64_t kTaRamBase = 0x30200000;
inline constexpr uint64_t kTaRamSize = 0x100000;
inline constexpr uint64_t kTaScratchAddr = kTaRamBase + 0x1000;
inline constexpr uint64_t kNsKernelBase = 0x40000000;
inline constexpr uint64_t kNsUserBase = 0x40100000;
inline constexpr uint64_t kShmBase = 0x40200000;
inline constexpr uint64_t kShmSize = 0x100000;

inline constexpr int kDmaFiqId = 40;
inline constexpr int kDataIrqId = 41;

inline constexpr tee::Uuid kI2sPtaUuid = {0x6c, 0x1f, 0x66, 0x48, 0x48, 0x1e,
                                          0x43, 0x11, 0xa5, 0x2e, 0xf4, 0x7c,
                                          0x00, 0x49, 0x73, 0x31};

inline constexpr uint32_t kCmdPing = 0;
inline constexpr uint32_t kCmdCaptureMmio = 1;
inline constexpr uint32_t kCmdCaptureDma = 2;
inline constexpr uint32_t kCmdReadBuffer = 3;

/// Fixture hardware unique key: a fused per-device secret in the model.
inline std::array<uint8_t, 32> default_huk() {
  std::array<uint8_t, 32> huk{};
  for (size_t i = 0; i < huk.size(); ++i) huk[i] = static_cast<uint8_t>(i);
  return huk;
}

/// Canonical board device tree. The audio node mirrors a Jetson-style I2S
/// controller; only reg/status/secure-status drive the TZASC programming.
inline const std::string& default_dts() {
  static const std::string dts =
      "// fortress board: audio capture path\n"
      "i2s@2901000 {\n"
      "    compatible = \"nvidia,tegra194-i2s\";\n"
      "    reg = <0x0 0x2901000 0x0 0x100>;\n"
      "    status = \"okay\";\n"
      "    secure-status = \"secure\";\n"
      "    clocks = <0x10 0x39>;\n"
      "    clock-names = \"i2s\";\n"
      "    #sound-dai-cells = <0x0>;\n"
      "};\n";
  return dts;
}

/// Processor + fabric + devices under the fixed map. The clock/power block
/// is plain normal-world MMIO; writes there gate the I2S bit clock and set
/// the power level, so an untrusted driver can manage both without ever
/// touching the protected device window.
class Board {
 public:
  explicit Board(I2sConfig i2s_cfg = {})
      : fabric(ctx),
        i2s(fabric, "i2s0", kI2sBase, i2s_cfg, kDmaFiqId, kDataIrqId) {
    auto& clk = fabric.add_bank("clkpwr", kClockBase, kClockWindow);
    clk.set_write_hook(UntrustedDriver::kClkOffset,
                       [this](uint32_t v) { i2s.set_clock_gate((v & 1u) != 0); });
    clk.set_write_hook(UntrustedDriver::kPwrOffset, [this](uint32_t v) {
      i2s.set_power(v >= 2 ? PowerLevel::Full
                           : v == 1 ? PowerLevel::Low : PowerLevel::Off);
    });
    clk.set_raw(UntrustedDriver::kPwrOffset, 2);  // powered at reset

    fabric.add_bank("scratch", kScratchBase, kScratchWindow);
    fabric.add_open_region(kClockBase, kClockWindow);
    fabric.add_open_region(kScratchBase, kScratchWindow);
    fabric.add_ticker([this] { i2s.pump_frame(); });
  }

  Board(const Board&) = delete;
  Board& operator=(const Board&) = delete;

  /// Run the verified boot chain from pre-signed images on disk.
  boot::BootToken boot_from_dir(const std::filesystem::path& images_dir) {
    auto stages = image_tool::read_chain(images_dir);
    Bytes root = image_tool::read_root_key(images_dir);
    return boot::boot_chain(stages, root, fabric);
  }

  /// Build-and-boot with deterministic keys; the fast path for tests.
  boot::BootToken boot_with_generated_chain(uint64_t key_seed = 7) {
    image_tool::ChainKeys keys = image_tool::deterministic_keys(key_seed);
    auto chain = image_tool::build_chain(
        keys, image_tool::default_contents(default_dts()));
    return boot::boot_chain(chain, keys.root_public(), fabric);
  }

  ProcessorContext ctx;
  MemFabric fabric;
  I2sDevice i2s;
};

/// The secure software stack: TEE runtime, partitioned trusted driver and
/// the I2S pseudo-TA. Construction models TEE init: it secures the TEE and
/// TA RAM with firmware privileges, binds the driver to the device tree
/// node, and registers the capture commands.
class TeeStack {
 public:
  TeeStack(Board& board, boot::BootToken token, uint64_t rng_seed = 1)
      : board_(board), token_(std::move(token)) {
    if (!token_ || !token_->success())
      throw BootRequired("TEE init requires a successful boot report");
    {
      FirmwareSection fw(board_.ctx);
      board_.fabric.configure_secure_region(kTeeRamBase, kTeeRamSize);
      board_.fabric.configure_secure_region(kTaRamBase, kTaRamSize);
    }
    rt_ = std::make_unique<tee::TeeRuntime>(board_.fabric, default_huk(),
                                            kTaRamBase, kTaRamSize, rng_seed);
    const devtree::DeviceNode* node = nullptr;
    for (const auto& n : token_->dt_nodes)
      if (n.secure_status == devtree::DeviceNode::SecureStatus::Secure &&
          !n.reg.empty())
        node = &n;
    if (!node) throw RegionNotSecure("boot report carries no secure device node");
    board_.ctx.call_secure([&](ProcessorContext&) {
      driver_ = std::make_unique<TrustedDriver>(board_.fabric, *node, token_,
                                                kDmaFiqId, kDataIrqId,
                                                kCaptureBufBase, kCaptureBufSize);
    });

    rt_->register_pta(kI2sPtaUuid, "i2s-capture");
    rt_->register_command(kI2sPtaUuid, kCmdPing, [](std::vector<tee::StagedParam>& p) {
      if (!p.empty() && p[0].kind == tee::TeeParam::Kind::Value) {
        p[0].a += 1;
        p[0].b ^= 0xFFFF;
      }
    });
    rt_->register_command(kI2sPtaUuid, kCmdCaptureMmio,
                          [this](std::vector<tee::StagedParam>& p) {
                            last_capture_ = driver_->capture_mmio(frames_arg(p));
                            if (!p.empty()) p[0].b = last_capture_.size();
                          });
    rt_->register_command(kI2sPtaUuid, kCmdCaptureDma,
                          [this](std::vector<tee::StagedParam>& p) {
                            last_capture_ = driver_->capture_dma(frames_arg(p));
                            if (!p.empty()) p[0].b = last_capture_.size();
                          });
    rt_->register_command(kI2sPtaUuid, kCmdReadBuffer,
                          [this](std::vector<tee::StagedParam>& p) {
                            if (p.empty() || p[0].kind != tee::TeeParam::Kind::MemRef)
                              throw BadParamRange("READ_BUFFER wants an out memref");
                            rt_->stage_copy(p[0], last_capture_);
                          });
  }

  tee::TeeRuntime& rt() { return *rt_; }
  TrustedDriver& driver() { return *driver_; }
  boot::BootToken token() const { return token_; }
  const Bytes& last_capture() const { return last_capture_; }

  tee::Session open_session() {
    return board_.ctx.call_secure(
        [&](ProcessorContext&) { return rt_->open_session(kI2sPtaUuid); });
  }

  /// Client-side capture: one capture invocation plus one READ_BUFFER
  /// invocation landing the bytes in the TA's private scratch range.
  Bytes capture(const tee::Session& sess, uint64_t n_frames, bool via_dma) {
    return board_.ctx.call_secure([&](ProcessorContext&) {
      tee::TeeParamList cap{tee::TeeParam::value(n_frames, 0)};
      rt_->invoke_command(sess, via_dma ? kCmdCaptureDma : kCmdCaptureMmio, cap);
      const uint64_t len = n_frames * 4;
      tee::TeeParamList rd{
          tee::TeeParam::memref(kTaScratchAddr, len, tee::ParamDir::Out)};
      rt_->invoke_command(sess, kCmdReadBuffer, rd);
      return board_.fabric.read_bytes(kTaScratchAddr, len);
    });
  }

 private:
  static uint64_t frames_arg(const std::vector<tee::StagedParam>& p) {
    if (p.empty() || p[0].kind != tee::TeeParam::Kind::Value)
      throw BadParamRange("capture command wants a value param");
    return p[0].a;
  }

  Board& board_;
  boot::BootToken token_;
  std::unique_ptr<tee::TeeRuntime> rt_;
  std::unique_ptr<TrustedDriver> driver_;
  Bytes last_capture_;
};

}  // namespace fortress::platform
