// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Flat physical memory with TZASC-style region policies, world-checked
// loads/stores and copy primitives, MMIO register banks with 32-bit cells
// and width truncation, and a DMA engine that signals completion with a
// secure-world FIQ. All work-unit accounting for the benchmark harness
// lives here.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "fortress/bytes.hpp"
#include "fortress/counters.hpp"
#include "fortress/errors.hpp"
#include "fortress/soc_state.hpp"

namespace fortress {

enum class AccessKind : uint8_t { Read, Write };

/// One TZASC region: [base, base+size) tagged secure-only or open.
struct RegionPolicy {
  uint64_t base = 0;
  uint64_t size = 0;
  bool secure_only = false;
  int id = 0;
};

/// A bank of 32-bit device registers. Offsets with hooks defer to the
/// device model; plain offsets behave as scratch cells.
class MmioBank {
 public:
  using ReadHook = std::function<uint32_t()>;
  using WriteHook = std::function<void(uint32_t)>;

  MmioBank(std::string name, uint64_t base, uint64_t size)
      : name_(std::move(name)), base_(base), size_(size), regs_(size / 4, 0) {}

  const std::string& name() const { return name_; }
  uint64_t base() const { return base_; }
  uint64_t size() const { return size_; }
  bool contains(uint64_t addr, uint64_t len) const {
    return addr >= base_ && addr + len <= base_ + size_;
  }

  void set_read_hook(uint64_t offset, ReadHook hook) {
    read_hooks_[offset] = std::move(hook);
  }
  void set_write_hook(uint64_t offset, WriteHook hook) {
    write_hooks_[offset] = std::move(hook);
  }

  uint32_t raw(uint64_t offset) const { return regs_.at(offset / 4); }
  void set_raw(uint64_t offset, uint32_t v) { regs_.at(offset / 4) = v; }

  uint32_t read(uint64_t offset) {
    auto it = read_hooks_.find(offset);
    if (it != read_hooks_.end()) {
      uint32_t v = it->second();
      regs_.at(offset / 4) = v;
      return v;
    }
    return regs_.at(offset / 4);
  }

  void write(uint64_t offset, uint32_t value) {
    regs_.at(offset / 4) = value;
    auto it = write_hooks_.find(offset);
    if (it != write_hooks_.end()) it->second(value);
  }

 private:
  std::string name_;
  uint64_t base_;
  uint64_t size_;
  std::vector<uint32_t> regs_;
  std::map<uint64_t, ReadHook> read_hooks_;
  std::map<uint64_t, WriteHook> write_hooks_;
};

/// Device-side producer for DMA transfers.
class DmaSource {
 public:
  virtual ~DmaSource() = default;
  /// Supply up to max bytes of device output; returns the count provided.
  /// Returning 0 stalls the transfer for this tick.
  virtual size_t dma_pull(uint8_t* dst, size_t max) = 0;
};

enum class DmaState : uint8_t { Programmed, Running, Complete };

struct DmaTransfer {
  int id = 0;
  std::string source;
  uint64_t dst_base = 0;
  uint64_t len = 0;
  DmaState state = DmaState::Programmed;
  int completion_irq = 0;
  uint64_t moved = 0;
};

/// Mapping token returned by map_mmio; identity-mapped.
struct MmioMapping {
  int id = 0;
  uint64_t base = 0;
  uint64_t size = 0;
};

/// The memory fabric. Owns the WorkCounters and attaches them to the
/// processor context so SMC round trips are charged alongside memory work.
///
/// Charging rules:
///   check_access        1 access check
///   ioread/iowrite      1 access check
///   mem_read/mem_write  1 access check
///   copy                2 access checks + len bytes copied
///   copy_to_user        3 access checks + len bytes copied
///   dma_program         1 access check; moved bytes count as bytes copied
class MemFabric {
 public:
  static constexpr uint64_t kDmaBytesPerTick = 64;

  explicit MemFabric(ProcessorContext& ctx) : ctx_(ctx) {
    ctx_.attach_counters(&counters_);
  }
  MemFabric(const MemFabric&) = delete;
  MemFabric& operator=(const MemFabric&) = delete;

  ProcessorContext& ctx() { return ctx_; }

  // ------------------------------------------------------------ policies

  /// Register a secure-only region. Firmware-only: requires (Secure, EL3).
  int configure_secure_region(uint64_t base, uint64_t size) {
    if (ctx_.world() != World::Secure || ctx_.el() != El::El3)
      throw PrivilegeViolation("configure_secure_region requires Secure EL3");
    return add_policy(base, size, true);
  }

  /// Register an open region (board wiring; no privilege gate).
  int add_open_region(uint64_t base, uint64_t size) {
    return add_policy(base, size, false);
  }

  const std::vector<RegionPolicy>& policies() const { return policies_; }

  std::vector<std::pair<uint64_t, uint64_t>> secure_region_list() const {
    std::vector<std::pair<uint64_t, uint64_t>> out;
    for (const auto& p : policies_)
      if (p.secure_only) out.emplace_back(p.base, p.size);
    return out;
  }

  /// Observer invoked for every access check: (world, addr, len, kind,
  /// decision). Test-suite instrumentation; does not affect counting.
  using AccessTrace = std::function<void(World, uint64_t, uint64_t, AccessKind, bool)>;
  void set_access_trace(AccessTrace fn) { trace_ = std::move(fn); }

  /// allow iff world == Secure or the range touches no secure-only region.
  bool check_access(World world, uint64_t addr, uint64_t len, AccessKind kind) {
    counters_.access_checks += 1;
    bool allow = world == World::Secure || !range_touches_secure(addr, len);
    if (trace_) trace_(world, addr, len, kind, allow);
    return allow;
  }

  bool range_touches_secure(uint64_t addr, uint64_t len) const {
    for (const auto& p : policies_)
      if (p.secure_only && p.base < addr + len && addr < p.base + p.size)
        return true;
    return false;
  }

  /// True if [addr, addr+len) lies fully inside one secure-only region.
  bool range_is_secure(uint64_t addr, uint64_t len) const {
    for (const auto& p : policies_)
      if (p.secure_only && addr >= p.base && addr + len <= p.base + p.size)
        return true;
    return false;
  }

  // ------------------------------------------------------------ MMIO

  MmioBank& add_bank(std::string name, uint64_t base, uint64_t size) {
    auto bank = std::make_unique<MmioBank>(std::move(name), base, size);
    MmioBank& ref = *bank;
    banks_.push_back(std::move(bank));
    return ref;
  }

  MmioBank* find_bank(uint64_t addr, uint64_t len) {
    for (auto& b : banks_)
      if (b->contains(addr, len)) return b.get();
    return nullptr;
  }

  uint32_t ioread32(uint64_t addr) { return mmio_read(addr); }
  uint16_t ioread16(uint64_t addr) { return static_cast<uint16_t>(mmio_read(addr)); }
  uint8_t ioread8(uint64_t addr) { return static_cast<uint8_t>(mmio_read(addr)); }

  void iowrite32(uint64_t addr, uint32_t v) { mmio_write(addr, v); }
  void iowrite16(uint64_t addr, uint16_t v) { mmio_write(addr, v); }
  void iowrite8(uint64_t addr, uint8_t v) { mmio_write(addr, v); }

  /// Secure-kernel API mirroring core_mmu_add_mapping: returns an identity
  /// mapping token. Requires (Secure, EL1).
  MmioMapping map_mmio(uint64_t base, uint64_t size) {
    if (ctx_.world() != World::Secure || ctx_.el() != El::El1)
      throw PrivilegeViolation("map_mmio requires Secure EL1");
    if (find_bank(base, size) == nullptr)
      throw UnmappedAddress("no MMIO bank at " + to_hex_addr(base));
    MmioMapping m{next_mapping_id_++, base, size};
    active_mappings_.insert(m.id);
    return m;
  }

  void unmap(const MmioMapping& m) { active_mappings_.erase(m.id); }
  size_t mapping_count() const { return active_mappings_.size(); }

  // ------------------------------------------------------------ RAM

  Bytes mem_read(uint64_t addr, uint64_t len) {
    require_access(addr, len, AccessKind::Read);
    Bytes out(len);
    peek_range(addr, out.data(), len);
    return out;
  }

  void mem_write(uint64_t addr, ByteSpan data) {
    require_access(addr, data.size(), AccessKind::Write);
    poke_range(addr, data.data(), data.size());
  }

  /// Kernel memcpy primitive: one check per side, len bytes of copy work.
  void copy(uint64_t dst, uint64_t src, uint64_t len) {
    require_access(src, len, AccessKind::Read);
    require_access(dst, len, AccessKind::Write);
    move_bytes(dst, src, len);
    counters_.bytes_copied += len;
  }

  /// Kernel-to-user copy: the user destination pointer is validated before
  /// the two range checks, so the primitive costs one extra access check.
  void copy_to_user(uint64_t user_dst, uint64_t src, uint64_t len) {
    counters_.access_checks += 1;
    require_access(src, len, AccessKind::Read);
    require_access(user_dst, len, AccessKind::Write);
    move_bytes(user_dst, src, len);
    counters_.bytes_copied += len;
  }

  /// Unchecked, uncounted accessors for board assembly and test oracles.
  Bytes read_bytes(uint64_t addr, uint64_t len) const {
    Bytes out(len);
    peek_range(addr, out.data(), len);
    return out;
  }
  void write_bytes(uint64_t addr, ByteSpan data) {
    poke_range(addr, data.data(), data.size());
  }

  // ------------------------------------------------------------ DMA

  void register_dma_source(const std::string& id, DmaSource* src, uint64_t bank_base) {
    dma_sources_[id] = SourceEntry{src, bank_base};
  }

  /// Board wiring: callbacks run at the head of every tick, before DMA
  /// moves. Device models use this to advance their clocks.
  void add_ticker(std::function<void()> fn) { tickers_.push_back(std::move(fn)); }

  DmaTransfer dma_program(const std::string& source_id, uint64_t dst_base,
                          uint64_t len, int completion_irq) {
    auto it = dma_sources_.find(source_id);
    if (it == dma_sources_.end())
      throw UnknownDevice("no DMA source '" + source_id + "'");
    if (!check_access(ctx_.world(), dst_base, std::max<uint64_t>(len, 1),
                      AccessKind::Write))
      throw AccessDenied("DMA destination not writable from " +
                         std::string(to_string(ctx_.world())));
    // A secure bus master may scatter only into secure memory; anything
    // else would let device data leak past the TZASC.
    if (len > 0 && range_is_secure(it->second.bank_base, 4) &&
        !range_is_secure(dst_base, len))
      throw AccessDenied("secure device DMA into non-secure destination");
    DmaTransfer t;
    t.id = next_dma_id_++;
    t.source = source_id;
    t.dst_base = dst_base;
    t.len = len;
    t.completion_irq = completion_irq;
    if (len == 0) {
      t.state = DmaState::Complete;
      transfers_[t.id] = t;
      return t;
    }
    t.state = DmaState::Programmed;
    transfers_[t.id] = t;
    return t;
  }

  DmaTransfer dma_status(int id) const { return transfers_.at(id); }

  /// Run device tickers, then advance every live transfer by up to
  /// 64 bytes; returns true if any transfer made progress or completed.
  bool tick() {
    for (auto& fn : tickers_) fn();
    bool progressed = false;
    for (auto& [id, t] : transfers_) {
      if (t.state == DmaState::Complete) continue;
      t.state = DmaState::Running;
      DmaSource* src = dma_sources_.at(t.source).src;
      uint64_t want = std::min<uint64_t>(kDmaBytesPerTick, t.len - t.moved);
      std::vector<uint8_t> buf(want);
      size_t got = src->dma_pull(buf.data(), buf.size());
      if (got > 0) {
        poke_range(t.dst_base + t.moved, buf.data(), got);
        t.moved += got;
        counters_.bytes_copied += got;
        progressed = true;
      }
      if (t.moved == t.len) {
        t.state = DmaState::Complete;
        progressed = true;
        ctx_.deliver_interrupt(t.completion_irq, IrqKind::Fiq);
      }
    }
    return progressed;
  }

  // ------------------------------------------------------------ counters

  WorkCounters counters_snapshot() const { return counters_; }
  void counters_reset() { counters_.reset(); }
  WorkCounters& counters() { return counters_; }

  // ------------------------------------------------------------ audit

  /// Search non-secure memory for a byte pattern; returns match addresses.
  /// Used to assert that key material never reaches the normal world.
  std::vector<uint64_t> scan_nonsecure(ByteSpan pattern) const {
    std::vector<uint64_t> hits;
    if (pattern.empty()) return hits;
    for (const auto& entry : pages_) {
      uint64_t page_base = entry.first * kPageSize;
      if (range_is_secure(page_base, kPageSize)) continue;
      for (uint64_t off = 0; off < kPageSize; ++off) {
        uint64_t addr = page_base + off;
        if (range_touches_secure(addr, pattern.size())) continue;
        bool match = true;
        for (size_t k = 0; k < pattern.size(); ++k) {
          if (peek(addr + k) != pattern[k]) {
            match = false;
            break;
          }
        }
        if (match) hits.push_back(addr);
      }
    }
    return hits;
  }

  /// Debug dump: one "ADDR: 16 bytes" hex line per 16-byte row.
  std::string dump(uint64_t addr, uint64_t len) const {
    std::ostringstream os;
    for (uint64_t row = 0; row < len; row += 16) {
      os << to_hex_addr(addr + row) << ":";
      for (uint64_t k = row; k < std::min(len, row + 16); ++k) {
        static const char* digits = "0123456789abcdef";
        uint8_t b = peek(addr + k);
        os << ' ' << digits[b >> 4] << digits[b & 0xF];
      }
      os << '\n';
    }
    return os.str();
  }

 private:
  static constexpr uint64_t kPageSize = 4096;

  struct SourceEntry {
    DmaSource* src = nullptr;
    uint64_t bank_base = 0;
  };

  static std::string to_hex_addr(uint64_t addr) {
    std::ostringstream os;
    os << "0x" << std::hex << addr;
    return os.str();
  }

  int add_policy(uint64_t base, uint64_t size, bool secure_only) {
    if (size == 0 || base + size < base)
      throw OverlapError("region size zero or wraps the address space");
    for (const auto& p : policies_)
      if (p.base < base + size && base < p.base + p.size)
        throw OverlapError("region overlaps existing policy " +
                           std::to_string(p.id));
    RegionPolicy pol{base, size, secure_only, next_policy_id_++};
    policies_.push_back(pol);
    return pol.id;
  }

  void require_access(uint64_t addr, uint64_t len, AccessKind kind) {
    if (!check_access(ctx_.world(), addr, len, kind))
      throw AccessDenied("world " + std::string(to_string(ctx_.world())) +
                         " denied at " + to_hex_addr(addr));
  }

  uint32_t mmio_read(uint64_t addr) {
    MmioBank& bank = resolve(addr, AccessKind::Read);
    return bank.read(addr - bank.base());
  }

  void mmio_write(uint64_t addr, uint32_t value) {
    MmioBank& bank = resolve(addr, AccessKind::Write);
    bank.write(addr - bank.base(), value);
  }

  MmioBank& resolve(uint64_t addr, AccessKind kind) {
    if (addr % 4 != 0)
      throw AlignmentError("MMIO access at unaligned " + to_hex_addr(addr));
    MmioBank* bank = find_bank(addr, 4);
    if (bank == nullptr)
      throw UnmappedAddress("no MMIO bank at " + to_hex_addr(addr));
    if (!check_access(ctx_.world(), addr, 4, kind))
      throw AccessDenied("MMIO " + to_hex_addr(addr) + " denied from " +
                         std::string(to_string(ctx_.world())));
    return *bank;
  }

  uint8_t peek(uint64_t addr) const {
    auto it = pages_.find(addr / kPageSize);
    if (it == pages_.end()) return 0;
    return it->second[addr % kPageSize];
  }

  void peek_range(uint64_t addr, uint8_t* out, uint64_t len) const {
    for (uint64_t k = 0; k < len; ++k) out[k] = peek(addr + k);
  }

  void poke_range(uint64_t addr, const uint8_t* in, uint64_t len) {
    for (uint64_t k = 0; k < len; ++k) {
      auto& page = pages_[(addr + k) / kPageSize];
      if (page.empty()) page.resize(kPageSize, 0);
      page[(addr + k) % kPageSize] = in[k];
    }
  }

  void move_bytes(uint64_t dst, uint64_t src, uint64_t len) {
    Bytes tmp(len);
    peek_range(src, tmp.data(), len);
    poke_range(dst, tmp.data(), len);
  }

  ProcessorContext& ctx_;
  WorkCounters counters_;
  AccessTrace trace_;
  std::vector<RegionPolicy> policies_;
  int next_policy_id_ = 1;
  std::vector<std::unique_ptr<MmioBank>> banks_;
  std::set<int> active_mappings_;
  int next_mapping_id_ = 1;
  std::map<std::string, SourceEntry> dma_sources_;
  std::vector<std::function<void()>> tickers_;
  std::map<int, DmaTransfer> transfers_;
  int next_dma_id_ = 1;
  std::unordered_map<uint64_t, std::vector<uint8_t>> pages_;
};

}  // namespace fortress
