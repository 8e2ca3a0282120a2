// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// The partitioned I2S driver. The trusted half runs in the secure world at
// EL1: it maps the device window, captures frames by MMIO polling or DMA
// into a secure buffer, and services the device's interrupts. The
// untrusted half runs in the normal world and only ever touches the open
// clock/power block. TCB accounting for the split lives here too.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "fortress/boot.hpp"
#include "fortress/bytes.hpp"
#include "fortress/devtree.hpp"
#include "fortress/errors.hpp"
#include "fortress/i2s_dev.hpp"
#include "fortress/mem_fabric.hpp"

namespace fortress {

/// Secure-world driver half. Construct via trusted_init-style call in the
/// secure world at EL1; construction without a successful boot report is
/// refused, modeling the chain of trust extending into the driver.
class TrustedDriver {
 public:
  TrustedDriver(MemFabric& fabric, const devtree::DeviceNode& node,
                boot::BootToken token, int dma_fiq_id, int data_irq_id,
                uint64_t buffer_base, uint64_t buffer_size)
      : fabric_(fabric),
        dma_fiq_id_(dma_fiq_id),
        buffer_base_(buffer_base),
        buffer_size_(buffer_size) {
    if (!token || !token->success())
      throw BootRequired("trusted driver requires a successful boot report");
    if (node.reg.empty()) throw RegionNotSecure("device node has no reg window");
    mmio_base_ = node.reg[0].first;
    mmio_size_ = node.reg[0].second;
    if (!fabric_.range_is_secure(mmio_base_, mmio_size_))
      throw RegionNotSecure("device window is not TZASC-protected");
    if (!fabric_.range_is_secure(buffer_base_, buffer_size_))
      throw RegionNotSecure("capture buffer is not TZASC-protected");
    mapping_ = fabric_.map_mmio(mmio_base_, mmio_size_);
    fabric_.iowrite32(reg(I2sDevice::kCtrl), 0);
    fabric_.ctx().register_irq(dma_fiq_id_, World::Secure,
                               [this](ProcessorContext&) { dma_done_ = true; });
    fabric_.ctx().register_irq(data_irq_id, World::Secure,
                               [this](ProcessorContext&) { ack_data_irq(); });
  }

  TrustedDriver(const TrustedDriver&) = delete;
  TrustedDriver& operator=(const TrustedDriver&) = delete;

  uint64_t mmio_base() const { return mmio_base_; }
  uint64_t buffer_base() const { return buffer_base_; }
  uint64_t buffer_size() const { return buffer_size_; }

  /// Poll STATUS and pop DATA one frame at a time into the secure capture
  /// buffer; returns a copy of the captured bytes.
  Bytes capture_mmio(uint64_t n_frames) {
    require_live();
    if (n_frames * 4 > buffer_size_) throw Error("capture exceeds secure buffer");
    fabric_.iowrite32(reg(I2sDevice::kCtrl), 0x1);
    Bytes out;
    uint64_t captured = 0;
    int idle_ticks = 0;
    while (captured < n_frames) {
      uint32_t status = fabric_.ioread32(reg(I2sDevice::kStatus));
      if (status & 0x80000000u) {
        fabric_.iowrite32(reg(I2sDevice::kCtrl), 0);
        throw Overrun("FIFO overrun latched during capture");
      }
      if ((status & 0x7FFFFFFFu) == 0) {
        fabric_.tick();
        if (++idle_ticks > kStallTicks) {
          fabric_.iowrite32(reg(I2sDevice::kCtrl), 0);
          throw SourceExhausted("device produced no data while polling");
        }
        continue;
      }
      idle_ticks = 0;
      uint32_t word = fabric_.ioread32(reg(I2sDevice::kData));
      Bytes le(4);
      le[0] = static_cast<uint8_t>(word);
      le[1] = static_cast<uint8_t>(word >> 8);
      le[2] = static_cast<uint8_t>(word >> 16);
      le[3] = static_cast<uint8_t>(word >> 24);
      fabric_.mem_write(buffer_base_ + captured * 4, le);
      out.insert(out.end(), le.begin(), le.end());
      ++captured;
    }
    fabric_.iowrite32(reg(I2sDevice::kCtrl), 0);
    return out;
  }

  /// Program the device's DMA engine at the secure buffer and block on the
  /// completion FIQ; returns a copy of the captured bytes.
  Bytes capture_dma(uint64_t n_frames) {
    require_live();
    const uint64_t len = n_frames * 4;
    if (len > buffer_size_) throw Error("capture exceeds secure buffer");
    if (len == 0) return {};
    fabric_.iowrite32(reg(I2sDevice::kCtrl), 0x3);  // enable + dma_enable
    fabric_.iowrite32(reg(I2sDevice::kDmaAddr),
                      static_cast<uint32_t>(buffer_base_));
    dma_done_ = false;
    try {
      fabric_.iowrite32(reg(I2sDevice::kDmaLen), static_cast<uint32_t>(len));
    } catch (const AccessDenied& e) {
      fabric_.iowrite32(reg(I2sDevice::kCtrl), 0);
      throw DmaFault(std::string("fabric denied the transfer: ") + e.what());
    }
    int idle_ticks = 0;
    while (!dma_done_) {
      if (fabric_.tick()) {
        idle_ticks = 0;
      } else if (++idle_ticks > kStallTicks) {
        fabric_.iowrite32(reg(I2sDevice::kCtrl), 0);
        throw SourceExhausted("DMA transfer starved of device data");
      }
    }
    fabric_.iowrite32(reg(I2sDevice::kCtrl), 0);
    return fabric_.mem_read(buffer_base_, len);
  }

  /// Capture into the caller-chosen destination. Used by the DMA-fault
  /// tests; normal captures use the driver's own secure buffer.
  Bytes capture_dma_to(uint64_t dst_base, uint64_t n_frames) {
    require_live();
    const uint64_t saved_base = buffer_base_;
    buffer_base_ = dst_base;
    try {
      Bytes out = capture_dma(n_frames);
      buffer_base_ = saved_base;
      return out;
    } catch (...) {
      buffer_base_ = saved_base;
      throw;
    }
  }

  void cleanup() {
    if (cleaned_up_) return;
    fabric_.iowrite32(reg(I2sDevice::kCtrl), 0);
    fabric_.unmap(mapping_);
    cleaned_up_ = true;
  }

  bool cleaned_up() const { return cleaned_up_; }

 private:
  static constexpr int kStallTicks = 1024;

  uint64_t reg(uint64_t offset) const { return mmio_base_ + offset; }

  void require_live() const {
    if (cleaned_up_) throw UseAfterCleanup("driver used after cleanup");
  }

  void ack_data_irq() {
    if (!cleaned_up_) fabric_.iowrite32(reg(I2sDevice::kIrqAck), 0x1);
  }

  MemFabric& fabric_;
  int dma_fiq_id_;
  uint64_t mmio_base_ = 0;
  uint64_t mmio_size_ = 0;
  uint64_t buffer_base_;
  uint64_t buffer_size_;
  MmioMapping mapping_{};
  bool dma_done_ = false;
  bool cleaned_up_ = false;
};

/// Normal-world driver half: clock gating and power management on the open
/// clock/power block. Holds no secure handle of any kind.
class UntrustedDriver {
 public:
  static constexpr uint64_t kClkOffset = 0x00;
  static constexpr uint64_t kPwrOffset = 0x04;

  UntrustedDriver(MemFabric& fabric, uint64_t clock_base)
      : fabric_(fabric), clock_base_(clock_base) {}

  void clock_enable() {
    require_live();
    fabric_.iowrite32(clock_base_ + kClkOffset, 1);
  }

  void clock_disable() {
    require_live();
    fabric_.iowrite32(clock_base_ + kClkOffset, 0);
  }

  void power_set(PowerLevel level) {
    require_live();
    fabric_.iowrite32(clock_base_ + kPwrOffset, static_cast<uint32_t>(level));
    power_state_ = level;
  }

  PowerLevel power_state() const { return power_state_; }

  void cleanup() {
    if (cleaned_up_) return;
    fabric_.iowrite32(clock_base_ + kClkOffset, 0);
    cleaned_up_ = true;
  }

  bool cleaned_up() const { return cleaned_up_; }

 private:
  void require_live() const {
    if (cleaned_up_) throw UseAfterCleanup("untrusted driver used after cleanup");
  }

  MemFabric& fabric_;
  uint64_t clock_base_;
  PowerLevel power_state_ = PowerLevel::Full;
  bool cleaned_up_ = false;
};

// --------------------------------------------------------------- TCB math

struct LocRow {
  std::string component;
  uint64_t trusted_loc = 0;
  uint64_t untrusted_loc = 0;
};

using LocTable = std::vector<LocRow>;

struct TcbRow {
  std::string component;
  double trusted_pct = 0.0;
  double untrusted_pct = 0.0;
};

struct TcbReport {
  std::vector<TcbRow> rows;
  double total_trusted_pct = 0.0;
  double total_untrusted_pct = 0.0;
};

/// CSV rows "component,trusted_loc,untrusted_loc"; a leading header line is
/// skipped.
inline LocTable parse_loc_csv(const std::string& text) {
  LocTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t c1 = line.find(',');
    size_t c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw Error("bad LOC csv line: " + line);
    std::string t = line.substr(c1 + 1, c2 - c1 - 1);
    std::string u = line.substr(c2 + 1);
    if (first && (t.empty() || !std::isdigit(static_cast<unsigned char>(t[0])))) {
      first = false;
      continue;  // header line
    }
    first = false;
    LocRow row;
    row.component = line.substr(0, c1);
    try {
      row.trusted_loc = std::stoull(t);
      row.untrusted_loc = std::stoull(u);
    } catch (const std::exception&) {
      throw Error("bad LOC csv line: " + line);
    }
    table.push_back(std::move(row));
  }
  return table;
}

/// Percentage of grand-total LOC per (component, side), half-up rounded to
/// two decimals, plus per-side totals.
inline TcbReport tcb_report(const LocTable& table) {
  uint64_t grand = 0;
  for (const auto& row : table) grand += row.trusted_loc + row.untrusted_loc;
  if (grand == 0) throw EmptyTable("LOC table has no nonzero rows");
  auto pct = [grand](uint64_t loc) {
    return std::round(static_cast<double>(loc) / static_cast<double>(grand) * 10000.0) /
           100.0;
  };
  TcbReport report;
  uint64_t trusted = 0, untrusted = 0;
  for (const auto& row : table) {
    report.rows.push_back(TcbRow{row.component, pct(row.trusted_loc),
                                 pct(row.untrusted_loc)});
    trusted += row.trusted_loc;
    untrusted += row.untrusted_loc;
  }
  report.total_trusted_pct = pct(trusted);
  report.total_untrusted_pct = pct(untrusted);
  return report;
}

}  // namespace fortress
