#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace peeg {

/// Every failure the station reports, across all modules.
enum class Errc {
  // converter model
  WrongLength,
  BadSyncNibble,
  CodeOutOfRange,
  UnknownRegister,
  ReadOnlyRegister,
  InvalidFieldEncoding,
  InvalidAddressRange,
  // synthesis
  UnsupportedRate,
  InvalidScenario,
  // acquisition
  BackendUnavailable,
  AlreadyRunning,
  PipelineClosed,
  Unsupported,
  NotRunning,
  // analysis
  UnstableDesign,
  NyquistViolation,
  InvalidFilter,
  TooShort,
  BadBand,
  // session store
  IoFailure,
  InconsistentRate,
  BadMagic,
  UnsupportedVersion,
  ChecksumMismatch,
  Truncated,
  // wire protocol
  UnknownType,
  LengthOverflow,
  Malformed,
  BindFailure,
  Unauthorized,
  ConnectionFailed,
  Remote,  // the peer answered ERR
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace peeg
