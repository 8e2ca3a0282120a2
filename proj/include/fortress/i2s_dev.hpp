// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Bit-level model of an I2S slave microphone. The bus master's bit clock is
// advanced in half-cycles; the slave shifts one bit MSB-first per rising
// edge, assembles words per channel, and delivers them to an MMIO FIFO or
// to DMA staging. The left-right clock selects the channel (L=0, R=1) and
// toggles at every frame boundary in stereo mode.

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "fortress/errors.hpp"
#include "fortress/mem_fabric.hpp"

namespace fortress {

enum class I2sChannels : uint8_t { MonoLeft, Stereo };
enum class PowerLevel : uint8_t { Off, Low, Full };

struct I2sConfig {
  uint32_t sample_rate = 16000;
  uint8_t bits_per_sample = 16;  // 16 or 32
  I2sChannels channels = I2sChannels::MonoLeft;
};

/// The device occupies a 0x100 MMIO window:
///   CTRL     +0x00  bit0 enable, bit1 dma_enable, bit2 irq_enable
///   STATUS   +0x04  FIFO occupancy; bit31 latches overrun
///   DATA     +0x08  pop-on-read FIFO head; 0 when empty
///   DMA_ADDR +0x0C  destination base for the next DMA transfer
///   DMA_LEN  +0x10  writing a nonzero length programs the transfer
///   IRQ_ACK  +0x14  bit0 acks the data IRQ, bit1 clears overrun
class I2sDevice : public DmaSource {
 public:
  static constexpr uint64_t kCtrl = 0x00;
  static constexpr uint64_t kStatus = 0x04;
  static constexpr uint64_t kData = 0x08;
  static constexpr uint64_t kDmaAddr = 0x0C;
  static constexpr uint64_t kDmaLen = 0x10;
  static constexpr uint64_t kIrqAck = 0x14;
  static constexpr size_t kFifoCapacity = 64;
  static constexpr uint64_t kWindowSize = 0x100;

  I2sDevice(MemFabric& fabric, std::string id, uint64_t base, I2sConfig config,
            int dma_fiq_id, int data_irq_id)
      : fabric_(fabric),
        id_(std::move(id)),
        base_(base),
        config_(config),
        dma_fiq_id_(dma_fiq_id),
        data_irq_id_(data_irq_id),
        bank_(fabric.add_bank(id_, base, kWindowSize)) {
    if (config_.bits_per_sample != 16 && config_.bits_per_sample != 32)
      throw Error("bits_per_sample must be 16 or 32");
    bank_.set_write_hook(kCtrl, [this](uint32_t v) { on_ctrl(v); });
    bank_.set_read_hook(kStatus, [this] { return status_word(); });
    bank_.set_read_hook(kData, [this] { return pop_data(); });
    bank_.set_write_hook(kDmaLen, [this](uint32_t v) { on_dma_len(v); });
    bank_.set_write_hook(kIrqAck, [this](uint32_t v) { on_irq_ack(v); });
    fabric.register_dma_source(id_, this, base);
  }

  const std::string& id() const { return id_; }
  uint64_t base() const { return base_; }
  const I2sConfig& config() const { return config_; }
  int dma_fiq_id() const { return dma_fiq_id_; }
  int data_irq_id() const { return data_irq_id_; }

  /// Board wiring driven by the clock/power block.
  void set_clock_gate(bool running) { clock_on_ = running; }
  void set_power(PowerLevel level) { power_ = level; }
  bool clock_gate() const { return clock_on_; }
  PowerLevel power() const { return power_; }

  /// Queue samples (already interleaved L/R for stereo) as the slave's
  /// output stream. Sample values use the low bits_per_sample bits.
  void attach_source(const std::vector<uint32_t>& samples) {
    if (enabled_) throw DeviceBusy("attach_source while CTRL.enable is set");
    source_.assign(samples.begin(), samples.end());
  }

  size_t pending_frames() const { return source_.size(); }
  uint64_t frames_assembled() const { return frames_assembled_; }
  bool enabled() const { return enabled_; }
  int lrclk() const { return lrclk_; }
  int bclk() const { return bclk_; }
  uint8_t bit_index() const { return bit_index_; }

  /// Advance the bit clock one half-cycle. A gated clock, non-full power or
  /// a disabled device makes this a silent no-op, as on real hardware.
  void step_clock() {
    if (!enabled_ || !clock_on_ || power_ != PowerLevel::Full) return;
    bclk_ ^= 1;
    if (bclk_ != 1) return;  // the slave shifts on rising edges only
    if (bit_index_ == 0) {
      if (source_.empty()) return;
      shifting_ = source_.front();
      source_.pop_front();
      assembled_ = 0;
    }
    uint32_t bit = (shifting_ >> (config_.bits_per_sample - 1 - bit_index_)) & 1u;
    assembled_ = assembled_ << 1 | bit;
    ++bit_index_;
    if (bit_index_ == config_.bits_per_sample) {
      bit_index_ = 0;
      push_word(assembled_);
      ++frames_assembled_;
      if (config_.channels == I2sChannels::Stereo) lrclk_ ^= 1;
    }
  }

  /// One master frame worth of half-cycles.
  void pump_frame() {
    for (unsigned k = 0; k < 2u * config_.bits_per_sample; ++k) step_clock();
  }

  /// Step the clock until n more frames have been assembled.
  void run_until_frames(uint64_t n) {
    const uint64_t target = frames_assembled_ + n;
    while (frames_assembled_ < target) {
      const uint64_t before = frames_assembled_;
      pump_frame();
      if (frames_assembled_ != before) continue;
      if (!enabled_ || !clock_on_ || power_ != PowerLevel::Full)
        throw DeviceStalled("device cannot clock (enable/clock-gate/power)");
      if (source_.empty() && bit_index_ == 0)
        throw SourceExhausted("source drained after " +
                              std::to_string(frames_assembled_) + " frames");
      throw DeviceStalled("no frame progress");
    }
  }

  // DmaSource: hand staged capture bytes to the DMA engine.
  size_t dma_pull(uint8_t* dst, size_t max) override {
    size_t n = std::min(max, dma_staging_.size());
    for (size_t k = 0; k < n; ++k) {
      dst[k] = dma_staging_.front();
      dma_staging_.pop_front();
    }
    return n;
  }

  size_t fifo_occupancy() const { return fifo_.size(); }
  bool overrun() const { return overrun_; }
  bool data_irq_pending() const { return data_irq_pending_; }

 private:
  void on_ctrl(uint32_t v) {
    enabled_ = (v & 1u) != 0;
    dma_enable_ = (v & 2u) != 0;
    irq_enable_ = (v & 4u) != 0;
    if (!enabled_) {
      fifo_.clear();
      dma_staging_.clear();
      overrun_ = false;
      data_irq_pending_ = false;
      bclk_ = 0;
      lrclk_ = 0;
      bit_index_ = 0;
      assembled_ = 0;
    }
  }

  uint32_t status_word() const {
    uint32_t occ = static_cast<uint32_t>(fifo_.size());
    return occ | (overrun_ ? 0x80000000u : 0u);
  }

  uint32_t pop_data() {
    if (fifo_.empty()) return 0;
    uint32_t v = fifo_.front();
    fifo_.pop_front();
    return v;
  }

  void on_dma_len(uint32_t len) {
    if (len == 0) return;
    uint64_t dst = bank_.raw(kDmaAddr);
    fabric_.dma_program(id_, dst, len, dma_fiq_id_);
  }

  void on_irq_ack(uint32_t v) {
    if (v & 1u) data_irq_pending_ = false;
    if (v & 2u) overrun_ = false;
  }

  void push_word(uint32_t w) {
    if (dma_enable_) {
      for (int k = 0; k < 4; ++k)
        dma_staging_.push_back(static_cast<uint8_t>(w >> (8 * k)));
      return;
    }
    if (fifo_.size() >= kFifoCapacity) {
      overrun_ = true;  // drop the newest frame
      return;
    }
    fifo_.push_back(w);
    if (irq_enable_ && !data_irq_pending_) {
      data_irq_pending_ = true;
      fabric_.ctx().deliver_interrupt(data_irq_id_, IrqKind::Irq);
    }
  }

  MemFabric& fabric_;
  std::string id_;
  uint64_t base_;
  I2sConfig config_;
  int dma_fiq_id_;
  int data_irq_id_;
  MmioBank& bank_;

  std::deque<uint32_t> source_;
  std::deque<uint32_t> fifo_;
  std::deque<uint8_t> dma_staging_;
  bool enabled_ = false;
  bool dma_enable_ = false;
  bool irq_enable_ = false;
  bool clock_on_ = false;
  PowerLevel power_ = PowerLevel::Full;
  int bclk_ = 0;
  int lrclk_ = 0;
  uint8_t bit_index_ = 0;
  uint32_t shifting_ = 0;
  uint32_t assembled_ = 0;
  bool overrun_ = false;
  bool data_irq_pending_ = false;
  uint64_t frames_assembled_ = 0;
};

}  // namespace fortress
