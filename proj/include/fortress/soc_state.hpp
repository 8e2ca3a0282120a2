// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Two-world processor model: NS bit, exception levels, banked register
// files, the secure monitor, and interrupt routing. No instruction set is
// modeled; the register file is an opaque blob that is only saved and
// restored across world switches.

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "fortress/counters.hpp"
#include "fortress/errors.hpp"

namespace fortress {

enum class World : uint8_t { Normal = 0, Secure = 1 };
enum class El : uint8_t { El0 = 0, El1 = 1, El2 = 2, El3 = 3 };
enum class IrqKind : uint8_t { Irq, Fiq };

inline constexpr World opposite(World w) {
  return w == World::Normal ? World::Secure : World::Normal;
}

inline const char* to_string(World w) {
  return w == World::Secure ? "Secure" : "Normal";
}

inline const char* to_string(El el) {
  switch (el) {
    case El::El0: return "EL0";
    case El::El1: return "EL1";
    case El::El2: return "EL2";
    case El::El3: return "EL3";
  }
  return "?";
}

/// Processor context for the simulated SoC.
///
/// SMC calls are synchronous round trips: the caller's register file is
/// banked, control transits monitor mode (EL3), the handler runs at EL1 in
/// the opposite world, and the caller's context is restored on return. One
/// round trip charges one world switch to the attached counters.
///
/// The context boots as (Normal, EL1): the REE kernel is the initial caller.
class ProcessorContext {
 public:
  using RegisterFile = std::array<uint8_t, 256>;
  using SmcHandler = std::function<std::vector<uint64_t>(
      ProcessorContext&, const std::vector<uint64_t>&)>;
  using IrqHandler = std::function<void(ProcessorContext&)>;
  using MonitorHook = std::function<void(ProcessorContext&)>;

  /// Built-in SMC id used by call_secure().
  static constexpr uint32_t kCallSecureSmcId = 0x83000000;

  ProcessorContext() {
    register_smc(kCallSecureSmcId,
                 [](ProcessorContext& ctx, const std::vector<uint64_t>&) {
                   auto fn = std::move(ctx.pending_secure_fn_);
                   ctx.pending_secure_fn_ = nullptr;
                   fn(ctx);
                   return std::vector<uint64_t>{};
                 });
  }

  World world() const { return world_; }
  El el() const { return el_; }
  std::pair<World, El> current_mode() const { return {world_, el_}; }
  int monitor_depth() const { return monitor_depth_; }
  /// Modeled SCR.NS bit: 0 in the secure world, 1 in the normal world.
  int ns_bit() const { return ns_bit_; }

  RegisterFile& regs() { return regs_; }
  const RegisterFile& regs() const { return regs_; }
  const RegisterFile& bank(World w) const { return banks_[index(w)]; }

  void attach_counters(WorkCounters* counters) { counters_ = counters; }
  WorkCounters* counters() const { return counters_; }

  void set_monitor_hook(MonitorHook hook) { monitor_hook_ = std::move(hook); }

  /// EL2 passthrough: when enabled, SMCs issued at EL1 are counted as
  /// forwarded by the hypervisor and then proceed unchanged.
  void set_hypervisor_passthrough(bool on) { hypervisor_ = on; }
  uint64_t hypervisor_forwarded() const { return hyp_forwarded_; }

  void register_smc(uint32_t call_id, SmcHandler handler) {
    smc_handlers_[call_id] = std::move(handler);
  }

  void register_irq(int irq_id, World handler_world, IrqHandler handler) {
    irq_handlers_[irq_id] = IrqEntry{handler_world, std::move(handler)};
  }

  /// Firmware shim: boot and TEE initialisation execute with monitor
  /// privileges before the normal world starts. Not for general use.
  void force_mode(World w, El el, int depth) {
    set_world(w);
    el_ = el;
    monitor_depth_ = depth;
    audit();
  }

  /// Synchronous secure monitor call. The handler for call_id runs at EL1
  /// in the world opposite the caller; the caller's mode and register file
  /// are restored before this returns, including on exception unwind.
  std::vector<uint64_t> smc_switch(uint32_t call_id,
                                   const std::vector<uint64_t>& args) {
    if (el_ == El::El0) throw PrivilegeViolation("SMC executed at EL0");
    auto it = smc_handlers_.find(call_id);
    if (it == smc_handlers_.end())
      throw UnknownSmcId("no handler for SMC id " + std::to_string(call_id));
    if (hypervisor_ && el_ == El::El1) ++hyp_forwarded_;

    const World caller_world = world_;
    const El caller_el = el_;
    banks_[index(caller_world)] = regs_;
    enter_monitor();
    begin_dispatch(opposite(caller_world));

    std::vector<uint64_t> result;
    try {
      result = it->second(*this, args);
    } catch (...) {
      unwind_to(caller_world, caller_el);
      throw;
    }
    unwind_to(caller_world, caller_el);
    return result;
  }

  /// Convenience wrapper: run fn in the secure world at EL1 via the built-in
  /// SMC trampoline. Runs fn inline if the caller is already secure.
  template <typename Fn>
  auto call_secure(Fn&& fn) -> std::invoke_result_t<Fn&, ProcessorContext&> {
    using R = std::invoke_result_t<Fn&, ProcessorContext&>;
    if (world_ == World::Secure) return fn(*this);
    if constexpr (std::is_void_v<R>) {
      pending_secure_fn_ = [&fn](ProcessorContext& c) { fn(c); };
      smc_switch(kCallSecureSmcId, {});
    } else {
      std::optional<R> out;
      pending_secure_fn_ = [&fn, &out](ProcessorContext& c) { out.emplace(fn(c)); };
      smc_switch(kCallSecureSmcId, {});
      return std::move(*out);
    }
  }

  /// Deliver an interrupt. A secure-targeted FIQ transits monitor mode and
  /// dispatches in the secure world regardless of the current world; an IRQ
  /// dispatches in its handler's registered world. The pre-interrupt mode is
  /// restored afterward. Interrupts raised while a handler is running queue
  /// up and run after it returns, in order.
  void deliver_interrupt(int irq_id, IrqKind kind) {
    if (!irq_handlers_.contains(irq_id))
      throw UnknownIrq("no handler for irq " + std::to_string(irq_id));
    pending_irq_.push_back(Pending{irq_id, kind});
    if (dispatching_irq_) return;
    dispatching_irq_ = true;
    try {
      while (!pending_irq_.empty()) {
        Pending p = pending_irq_.front();
        pending_irq_.pop_front();
        dispatch_one(p);
      }
    } catch (...) {
      dispatching_irq_ = false;
      throw;
    }
    dispatching_irq_ = false;
  }

  size_t pending_irq_count() const { return pending_irq_.size(); }

  /// Consistency audit; throws std::logic_error if the NS bit or monitor
  /// depth disagree with the active mode.
  void audit() const {
    if (ns_bit_ != (world_ == World::Normal ? 1 : 0))
      throw std::logic_error("NS bit inconsistent with active world");
    if ((monitor_depth_ > 0) != (el_ == El::El3))
      throw std::logic_error("monitor depth inconsistent with EL3");
  }

 private:
  struct IrqEntry {
    World world;
    IrqHandler fn;
  };
  struct Pending {
    int id;
    IrqKind kind;
  };

  static constexpr size_t index(World w) { return static_cast<size_t>(w); }

  void set_world(World w) {
    world_ = w;
    ns_bit_ = (w == World::Normal) ? 1 : 0;
  }

  void enter_monitor() {
    set_world(World::Secure);
    el_ = El::El3;
    monitor_depth_ = 1;
    if (monitor_hook_) monitor_hook_(*this);
  }

  void begin_dispatch(World target) {
    monitor_depth_ = 0;
    set_world(target);
    el_ = El::El1;
    regs_ = banks_[index(target)];
    audit();
  }

  void unwind_to(World caller_world, El caller_el) {
    banks_[index(world_)] = regs_;
    enter_monitor();
    monitor_depth_ = 0;
    set_world(caller_world);
    el_ = caller_el;
    regs_ = banks_[index(caller_world)];
    if (counters_) counters_->world_switches += 1;
    audit();
  }

  void dispatch_one(const Pending& p) {
    const IrqEntry& ent = irq_handlers_.at(p.id);
    const World caller_world = world_;
    const El caller_el = el_;
    const bool crosses = ent.world != caller_world;
    if (crosses || p.kind == IrqKind::Fiq) {
      banks_[index(caller_world)] = regs_;
      enter_monitor();
      begin_dispatch(ent.world);
      try {
        ent.fn(*this);
      } catch (...) {
        restore_after_irq(caller_world, caller_el, crosses);
        throw;
      }
      restore_after_irq(caller_world, caller_el, crosses);
    } else {
      const El saved = el_;
      el_ = El::El1;
      try {
        ent.fn(*this);
      } catch (...) {
        el_ = saved;
        throw;
      }
      el_ = saved;
      audit();
    }
  }

  void restore_after_irq(World caller_world, El caller_el, bool crossed) {
    banks_[index(world_)] = regs_;
    enter_monitor();
    monitor_depth_ = 0;
    set_world(caller_world);
    el_ = caller_el;
    regs_ = banks_[index(caller_world)];
    if (crossed && counters_) counters_->world_switches += 1;
    audit();
  }

  World world_ = World::Normal;
  El el_ = El::El1;
  int ns_bit_ = 1;
  int monitor_depth_ = 0;
  RegisterFile regs_{};
  std::array<RegisterFile, 2> banks_{};
  std::deque<Pending> pending_irq_;
  bool dispatching_irq_ = false;
  std::map<uint32_t, SmcHandler> smc_handlers_;
  std::map<int, IrqEntry> irq_handlers_;
  MonitorHook monitor_hook_;
  std::function<void(ProcessorContext&)> pending_secure_fn_;
  WorkCounters* counters_ = nullptr;
  bool hypervisor_ = false;
  uint64_t hyp_forwarded_ = 0;
};

/// Scoped firmware execution mode: enters (Secure, EL3) for the duration of
/// a boot or TEE-initialisation sequence and restores the previous mode.
class FirmwareSection {
 public:
  explicit FirmwareSection(ProcessorContext& ctx)
      : ctx_(ctx), world_(ctx.world()), el_(ctx.el()), depth_(ctx.monitor_depth()) {
    ctx_.force_mode(World::Secure, El::El3, 1);
  }
  ~FirmwareSection() { ctx_.force_mode(world_, el_, depth_); }
  FirmwareSection(const FirmwareSection&) = delete;
  FirmwareSection& operator=(const FirmwareSection&) = delete;

 private:
  ProcessorContext& ctx_;
  World world_;
  El el_;
  int depth_;
};

}  // namespace fortress
