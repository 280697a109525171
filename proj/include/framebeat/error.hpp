#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace framebeat {

enum class ErrorCode {
  // audio
  MalformedContainer,
  UnsupportedEncoding,
  WindowOutOfRange,
  // crossfade
  IndexOutOfWindow,
  WindowExceedsBuffer,
  InvalidEnvelope,
  // timeline
  TempoOutOfRange,
  ClipShorterThanBar,
  CrossfadeLongerThanSection,
  SwapSuperseded,
  InvalidSwap,
  // caption
  BackendUnavailable,
  MalformedCaption,
  InvalidFrame,
  // prompt
  InstrumentCapViolation,
  InvalidSectionIndex,
  // generation
  ContractViolation,
  Timeout,
  // mixing
  TooFewSections,
  UploadFailed,
  JobFailed,
  InvalidTransition,
  // session
  SessionNotActive,
  BackPressure,
  InvalidState,
  // device
  ProtocolError,
  // config / io
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure surfaced by the library carries one of the codes above so
/// callers (HTTP layer, CLI, bindings) can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace framebeat
