// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fortress {

/// Root of the simulator's error taxonomy. Every throwing operation in the
/// library throws a subclass of this, so callers can catch broadly or by
/// specific condition.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define FORTRESS_DEFINE_ERROR(Name)      \
  struct Name : Error {                  \
    using Error::Error;                  \
    Name() : Error(#Name) {}             \
  }

// soc_state
FORTRESS_DEFINE_ERROR(PrivilegeViolation);
FORTRESS_DEFINE_ERROR(UnknownSmcId);
FORTRESS_DEFINE_ERROR(UnknownIrq);

// mem_fabric
FORTRESS_DEFINE_ERROR(OverlapError);
FORTRESS_DEFINE_ERROR(AccessDenied);
FORTRESS_DEFINE_ERROR(UnmappedAddress);
FORTRESS_DEFINE_ERROR(AlignmentError);
FORTRESS_DEFINE_ERROR(UnknownDevice);

// devtree
FORTRESS_DEFINE_ERROR(DuplicateNodeName);

// boot
FORTRESS_DEFINE_ERROR(MalformedKey);
FORTRESS_DEFINE_ERROR(MalformedImage);

// i2s_dev
FORTRESS_DEFINE_ERROR(DeviceBusy);
FORTRESS_DEFINE_ERROR(SourceExhausted);
FORTRESS_DEFINE_ERROR(DeviceStalled);

// drivers
FORTRESS_DEFINE_ERROR(BootRequired);
FORTRESS_DEFINE_ERROR(RegionNotSecure);
FORTRESS_DEFINE_ERROR(Overrun);
FORTRESS_DEFINE_ERROR(DmaFault);
FORTRESS_DEFINE_ERROR(UseAfterCleanup);
FORTRESS_DEFINE_ERROR(EmptyTable);

// tee_rt
FORTRESS_DEFINE_ERROR(UnknownUuid);
FORTRESS_DEFINE_ERROR(UnknownCommand);
FORTRESS_DEFINE_ERROR(BadParamRange);
FORTRESS_DEFINE_ERROR(SessionClosed);
FORTRESS_DEFINE_ERROR(HukUnavailable);
FORTRESS_DEFINE_ERROR(BadNonceReuse);
FORTRESS_DEFINE_ERROR(TagMismatch);
FORTRESS_DEFINE_ERROR(CorruptPayload);

// relay_cloud
FORTRESS_DEFINE_ERROR(ConnectError);
FORTRESS_DEFINE_ERROR(AckMismatch);
FORTRESS_DEFINE_ERROR(Timeout);
FORTRESS_DEFINE_ERROR(BindError);
FORTRESS_DEFINE_ERROR(ProtocolError);

#undef FORTRESS_DEFINE_ERROR

/// Device-tree parse failure; carries the 1-based source line.
struct SyntaxError : Error {
  explicit SyntaxError(const std::string& what, int line_no)
      : Error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
  int line;
};

/// Signature verification failure; names the boot stage it happened at.
struct IntegrityError : Error {
  explicit IntegrityError(const std::string& stage_name, const std::string& detail)
      : Error("integrity failure at stage " + stage_name + ": " + detail),
        stage(stage_name) {}
  std::string stage;
};

}  // namespace fortress
