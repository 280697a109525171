#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace framebeat {

inline constexpr int kSampleRate = 44100;
inline constexpr int kChannels = 2;

/// Stereo floating-point audio. Samples are normalized to [-1, 1]; both
/// channels always hold the same number of frames.
class AudioBuffer {
 public:
  AudioBuffer() = default;
  explicit AudioBuffer(std::size_t frames, int sample_rate = kSampleRate);
  AudioBuffer(std::vector<float> left, std::vector<float> right, int sample_rate = kSampleRate);

  /// Both channels carry the same signal.
  static AudioBuffer from_mono(std::span<const float> mono, int sample_rate = kSampleRate);

  std::size_t frames() const noexcept { return channels_[0].size(); }
  int sample_rate() const noexcept { return sample_rate_; }
  double duration_seconds() const noexcept {
    return static_cast<double>(frames()) / static_cast<double>(sample_rate_);
  }
  bool empty() const noexcept { return frames() == 0; }

  std::span<const float> channel(int c) const { return channels_.at(static_cast<std::size_t>(c)); }
  std::span<float> channel(int c) { return channels_.at(static_cast<std::size_t>(c)); }

  float at(int c, std::size_t n) const { return channels_[static_cast<std::size_t>(c)][n]; }
  float& at(int c, std::size_t n) { return channels_[static_cast<std::size_t>(c)][n]; }

  /// Copy of [start, start + len); throws WindowOutOfRange when it does not fit.
  AudioBuffer slice(std::size_t start, std::size_t len) const;
  AudioBuffer head(std::size_t len) const { return slice(0, len); }
  AudioBuffer tail(std::size_t len) const;

  /// Per-frame average of the two channels.
  std::vector<float> mono_mix() const;

  void clamp();

  friend bool operator==(const AudioBuffer&, const AudioBuffer&) = default;

 private:
  std::array<std::vector<float>, kChannels> channels_{};
  int sample_rate_ = kSampleRate;
};

/// RMS over a window, jointly over both channels.
struct PowerMeasure {
  std::size_t window_start = 0;
  std::size_t window_len = 0;
  double rms = 0.0;
  /// 20*log10(rms); negative infinity marks silence.
  double rms_db = 0.0;

  bool silent() const noexcept { return rms == 0.0; }
  double power() const noexcept { return rms * rms; }
};

double amplitude_to_db(double amplitude) noexcept;
double db_to_amplitude(double db) noexcept;

PowerMeasure rms_power(const AudioBuffer& buf, std::size_t start, std::size_t len);
inline PowerMeasure rms_power(const AudioBuffer& buf) { return rms_power(buf, 0, buf.frames()); }

/// Linear-interpolation resampler; the output has round(frames * target / source) frames.
AudioBuffer resample_linear(const AudioBuffer& in, int target_rate);

/// Accepts RIFF/WAVE PCM16 or IEEE float32, mono or stereo, any rate.
/// The result is always stereo at 44.1 kHz with samples clamped to [-1, 1].
AudioBuffer decode_wav(std::span<const std::uint8_t> bytes);

/// 16-bit little-endian PCM, stereo interleaved, 44-byte canonical header.
std::vector<std::uint8_t> encode_wav(const AudioBuffer& buf);

/// Quantizes one normalized sample the way encode_wav does.
std::int16_t quantize_pcm16(float sample) noexcept;

AudioBuffer read_wav_file(const std::string& path);
void write_wav_file(const std::string& path, const AudioBuffer& buf);

/// 64-bit FNV-1a; used for fixture keys and audio fingerprints.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept;
std::uint64_t fingerprint(const AudioBuffer& buf) noexcept;
std::string hex64(std::uint64_t value);

}  // namespace framebeat
