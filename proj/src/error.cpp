#include "framebeat/error.hpp"

namespace framebeat {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedContainer: return "MalformedContainer";
    case ErrorCode::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::WindowOutOfRange: return "WindowOutOfRange";
    case ErrorCode::IndexOutOfWindow: return "IndexOutOfWindow";
    case ErrorCode::WindowExceedsBuffer: return "WindowExceedsBuffer";
    case ErrorCode::InvalidEnvelope: return "InvalidEnvelope";
    case ErrorCode::TempoOutOfRange: return "TempoOutOfRange";
    case ErrorCode::ClipShorterThanBar: return "ClipShorterThanBar";
    case ErrorCode::CrossfadeLongerThanSection: return "CrossfadeLongerThanSection";
    case ErrorCode::SwapSuperseded: return "SwapSupersededError";
    case ErrorCode::InvalidSwap: return "InvalidSwap";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::MalformedCaption: return "MalformedCaption";
    case ErrorCode::InvalidFrame: return "InvalidFrame";
    case ErrorCode::InstrumentCapViolation: return "InstrumentCapViolation";
    case ErrorCode::InvalidSectionIndex: return "InvalidSectionIndex";
    case ErrorCode::ContractViolation: return "ContractViolation";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::TooFewSections: return "TooFewSections";
    case ErrorCode::UploadFailed: return "UploadFailed";
    case ErrorCode::JobFailed: return "JobFailed";
    case ErrorCode::InvalidTransition: return "InvalidTransition";
    case ErrorCode::SessionNotActive: return "SessionNotActive";
    case ErrorCode::BackPressure: return "BackPressure";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace framebeat
