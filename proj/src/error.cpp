#include "peeg/error.hpp"

namespace peeg {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::WrongLength: return "WrongLength";
    case Errc::BadSyncNibble: return "BadSyncNibble";
    case Errc::CodeOutOfRange: return "CodeOutOfRange";
    case Errc::UnknownRegister: return "UnknownRegister";
    case Errc::ReadOnlyRegister: return "ReadOnlyRegister";
    case Errc::InvalidFieldEncoding: return "InvalidFieldEncoding";
    case Errc::InvalidAddressRange: return "InvalidAddressRange";
    case Errc::UnsupportedRate: return "UnsupportedRate";
    case Errc::InvalidScenario: return "InvalidScenario";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::AlreadyRunning: return "AlreadyRunning";
    case Errc::PipelineClosed: return "PipelineClosed";
    case Errc::Unsupported: return "Unsupported";
    case Errc::NotRunning: return "NotRunning";
    case Errc::UnstableDesign: return "UnstableDesign";
    case Errc::NyquistViolation: return "NyquistViolation";
    case Errc::InvalidFilter: return "InvalidFilter";
    case Errc::TooShort: return "TooShort";
    case Errc::BadBand: return "BadBand";
    case Errc::IoFailure: return "IoFailure";
    case Errc::InconsistentRate: return "InconsistentRate";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::Truncated: return "Truncated";
    case Errc::UnknownType: return "UnknownType";
    case Errc::LengthOverflow: return "LengthOverflow";
    case Errc::Malformed: return "Malformed";
    case Errc::BindFailure: return "BindFailure";
    case Errc::Unauthorized: return "Unauthorized";
    case Errc::ConnectionFailed: return "ConnectionFailed";
    case Errc::Remote: return "Remote";
  }
  return "Unknown";
}

}  // namespace peeg
