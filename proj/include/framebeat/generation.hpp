#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "framebeat/audio.hpp"
#include "framebeat/prompt.hpp"

namespace framebeat {

struct GenerationRequest {
  static constexpr double kDurationSeconds = 15.0;

  std::string prompt;
  double duration_seconds = kDurationSeconds;
  int sample_rate = kSampleRate;
  int channels = kChannels;
  double bpm_hint = 100.0;
  std::optional<std::uint64_t> seed;
};

struct GenerationResult {
  AudioBuffer audio;
  GenerationRequest request;
  double backend_latency = 0.0;
  double cost_units = 0.0;
  int attempts = 0;
};

struct GenerationReply {
  std::vector<std::uint8_t> wav;
  double latency_seconds = 0.0;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::string name() const = 0;
  /// Throws BackendUnavailable on transport failure.
  virtual GenerationReply synthesize(const GenerationRequest& request) = 0;
};

/// Instruments listed at the head of a prompt ("keys, guitar section, ...").
std::vector<Instrument> instruments_in_prompt(const std::string& prompt);

/// Deterministic stand-in for the text-to-music model. Output depends only on
/// the prompt text and bpm_hint:
///   percussion  decaying click on every beat, peak 0.8 at the beat sample
///   bass        55 Hz sine gated on for the first three beats of each bar
///   keys        A minor triad of sines with a 0.1 s linear attack
///   guitar      low-passed sawtooth plucked on each beat
///   none        white-noise bed at -30 dBFS RMS
/// "moody" in the prompt lowers everything by 6 dB.
AudioBuffer mock_synthesize(const GenerationRequest& request);

class MockGenerationBackend final : public GenerationBackend {
 public:
  explicit MockGenerationBackend(double latency_seconds = 0.0) : latency_(latency_seconds) {}
  std::string name() const override { return "mock"; }
  GenerationReply synthesize(const GenerationRequest& request) override;

  void set_latency(double seconds) { latency_ = seconds; }
  void fail_next(std::size_t count) { failures_ = count; }
  /// Next reply is this many seconds long instead of the requested duration.
  void truncate_next(double seconds) { truncate_ = seconds; }
  std::size_t calls() const { return calls_; }

 private:
  double latency_;
  std::size_t failures_ = 0;
  std::optional<double> truncate_;
  std::size_t calls_ = 0;
  std::mutex mutex_;
};

/// JSON POST {prompt, duration, sample_rate, seed?}; the reply body is WAV.
class HttpGenerationBackend final : public GenerationBackend {
 public:
  struct Options {
    std::string url;
    std::string api_key;
    double timeout_seconds = 30.0;
  };
  explicit HttpGenerationBackend(Options options) : options_(std::move(options)) {}
  std::string name() const override { return "http"; }
  GenerationReply synthesize(const GenerationRequest& request) override;

 private:
  Options options_;
};

struct GenerationOptions {
  double timeout_seconds = 30.0;
  int retries = 1;
  double cost_per_call = 0.14;
};

/// Requests a clip and enforces the contract: 15 s stereo 44.1 kHz within
/// +-1% after decoding. BackendUnavailable and Timeout are retried
/// `retries` times.
GenerationResult generate(const GenerationRequest& request, GenerationBackend& backend,
                          const GenerationOptions& options = {});

}  // namespace framebeat
