// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace fortress {

/// Work-unit accounting shared by the fabric, the processor model and the
/// TEE runtime. Counts are monotonically non-decreasing until reset.
///
/// One access check is charged per range check, one byte per byte moved by a
/// copy primitive or DMA engine, one world switch per completed SMC round
/// trip (and per monitor-mediated interrupt or S-EL0<->S-EL1 transition),
/// and one secure syscall per dispatched TEE service request.
struct WorkCounters {
  uint64_t access_checks = 0;
  uint64_t bytes_copied = 0;
  uint64_t world_switches = 0;
  uint64_t secure_syscalls = 0;

  /// Scalar used by the copy-path benchmarks: total units of work done.
  uint64_t total_units() const {
    return access_checks + bytes_copied + world_switches + secure_syscalls;
  }

  WorkCounters operator-(const WorkCounters& rhs) const {
    return {access_checks - rhs.access_checks, bytes_copied - rhs.bytes_copied,
            world_switches - rhs.world_switches,
            secure_syscalls - rhs.secure_syscalls};
  }

  bool operator==(const WorkCounters&) const = default;

  void reset() { *this = WorkCounters{}; }
};

}  // namespace fortress
