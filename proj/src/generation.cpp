#include "framebeat/generation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "framebeat/error.hpp"
#include "http_client.hpp"

namespace framebeat {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<std::string> split_parts(const std::string& prompt) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= prompt.size()) {
    const auto comma = prompt.find(',', pos);
    std::string part = prompt.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const auto b = part.find_first_not_of(' ');
    parts.push_back(b == std::string::npos ? std::string() : part.substr(b));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return parts;
}

bool mentions(const std::string& prompt, const std::string& word) {
  std::istringstream in(prompt);
  std::string w;
  while (in >> w) {
    while (!w.empty() && (w.back() == ',' || w.back() == '.')) w.pop_back();
    if (w == word) return true;
  }
  return false;
}

void check_request(const GenerationRequest& r) {
  if (r.duration_seconds != GenerationRequest::kDurationSeconds || r.sample_rate != kSampleRate ||
      r.channels != kChannels) {
    throw Error(ErrorCode::ContractViolation, "generation parameters are fixed at 15 s, 44.1 kHz, stereo");
  }
  if (!(r.bpm_hint >= 40.0 && r.bpm_hint <= 240.0)) {
    throw Error(ErrorCode::ContractViolation, "bpm_hint outside [40, 240]");
  }
}

}  // namespace

std::vector<Instrument> instruments_in_prompt(const std::string& prompt) {
  std::vector<Instrument> out;
  for (const auto& part : split_parts(prompt)) {
    std::istringstream in(part);
    std::string first;
    in >> first;
    Instrument i;
    if (!parse_instrument(first, i)) break;
    if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
    std::string rest;
    if (in >> rest) break;  // "guitar section": last instrument of the list
  }
  return out;
}

AudioBuffer mock_synthesize(const GenerationRequest& request) {
  check_request(request);
  const auto frames = static_cast<std::size_t>(std::llround(request.duration_seconds * kSampleRate));
  const double sr = kSampleRate;
  const double beat = 60.0 / request.bpm_hint;
  const auto instruments = instruments_in_prompt(request.prompt);
  auto has = [&](Instrument i) { return std::find(instruments.begin(), instruments.end(), i) != instruments.end(); };
  const double gain = mentions(request.prompt, "moody") ? db_to_amplitude(-6.0) : 1.0;

  std::vector<float> left(frames, 0.0f);
  std::vector<float> right(frames, 0.0f);
  std::vector<double> mix(frames, 0.0);

  if (instruments.empty()) {
    const std::uint64_t seed = fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(request.prompt.data()),
                                                 request.prompt.size())) ^
                               static_cast<std::uint64_t>(std::llround(request.bpm_hint * 1000.0));
    std::mt19937_64 rng(seed);
    // Uniform noise on [-a, a] has RMS a / sqrt(3).
    const double a = db_to_amplitude(-30.0) * std::sqrt(3.0);
    std::uniform_real_distribution<double> dist(-a, a);
    for (std::size_t n = 0; n < frames; ++n) {
      left[n] = static_cast<float>(gain * dist(rng));
      right[n] = static_cast<float>(gain * dist(rng));
    }
    return AudioBuffer(std::move(left), std::move(right));
  }

  if (has(Instrument::Keys)) {
    const double freqs[] = {220.0, 261.63, 329.63};
    const double attack = 0.1 * sr;
    for (std::size_t n = 0; n < frames; ++n) {
      double v = 0.0;
      for (double f : freqs) v += 0.12 * std::sin(kTwoPi * f * n / sr);
      mix[n] += v * std::min(1.0, n / attack);
    }
  }
  if (has(Instrument::Bass)) {
    const double ramp = 0.01 * sr;
    const double bar = 4.0 * beat * sr;
    for (std::size_t n = 0; n < frames; ++n) {
      const double in_bar = std::fmod(static_cast<double>(n), bar);
      const double on = 3.0 * beat * sr;
      double env = 0.0;
      if (in_bar < on) env = std::min({1.0, in_bar / ramp, (on - in_bar) / ramp});
      mix[n] += 0.35 * env * std::sin(kTwoPi * 55.0 * n / sr);
    }
  }
  if (has(Instrument::Guitar)) {
    const double cutoff = 1200.0;
    const double k = 1.0 - std::exp(-kTwoPi * cutoff / sr);
    double lp = 0.0;
    const double beat_frames = beat * sr;
    for (std::size_t n = 0; n < frames; ++n) {
      const double bar_index = std::floor(n / (4.0 * beat_frames));
      const double f = std::fmod(bar_index, 2.0) == 0.0 ? 110.0 : 164.81;
      const double phase = std::fmod(f * n / sr, 1.0);
      lp += k * ((2.0 * phase - 1.0) - lp);
      const double since = std::fmod(static_cast<double>(n), beat_frames) / sr;
      const double env = std::min(1.0, since / 0.005) * std::exp(-since / 0.25);
      mix[n] += 0.25 * env * lp;
    }
  }
  if (has(Instrument::Percussion)) {
    const auto click_len = static_cast<std::size_t>(0.03 * sr);
    for (std::int64_t b = 0;; ++b) {
      const auto pos = static_cast<std::size_t>(std::llround(static_cast<double>(b) * beat * sr));
      if (pos >= frames) break;
      for (std::size_t j = 0; j < click_len && pos + j < frames; ++j) {
        mix[pos + j] += 0.8 * std::exp(-static_cast<double>(j) / (0.004 * sr)) * std::cos(kTwoPi * 1800.0 * j / sr);
      }
    }
  }
  for (std::size_t n = 0; n < frames; ++n) {
    const auto v = static_cast<float>(std::clamp(gain * mix[n], -1.0, 1.0));
    left[n] = v;
    right[n] = v;
  }
  return AudioBuffer(std::move(left), std::move(right));
}

GenerationReply MockGenerationBackend::synthesize(const GenerationRequest& request) {
  std::unique_lock lock(mutex_);
  ++calls_;
  if (failures_ > 0) {
    --failures_;
    throw Error(ErrorCode::BackendUnavailable, "mock generation backend: injected failure");
  }
  const std::optional<double> truncate = std::exchange(truncate_, std::nullopt);
  const double latency = latency_;
  lock.unlock();
  AudioBuffer audio = mock_synthesize(request);
  if (truncate) audio = audio.head(static_cast<std::size_t>(std::llround(*truncate * kSampleRate)));
  return {encode_wav(audio), latency};
}

GenerationReply HttpGenerationBackend::synthesize(const GenerationRequest& request) {
  nlohmann::json body{{"prompt", request.prompt},
                      {"duration", request.duration_seconds},
                      {"sample_rate", request.sample_rate},
                      {"output_format", "wav"}};
  if (request.seed) body["seed"] = *request.seed;
  std::vector<std::pair<std::string, std::string>> headers{{"Accept", "audio/wav"}};
  if (!options_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + options_.api_key);
  const auto started = std::chrono::steady_clock::now();
  const auto res = detail::http_post(options_.url, body.dump(), "application/json", headers, options_.timeout_seconds);
  const double latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (res.status < 200 || res.status >= 300) {
    throw Error(ErrorCode::BackendUnavailable, "generation service returned HTTP " + std::to_string(res.status));
  }
  return {std::vector<std::uint8_t>(res.body.begin(), res.body.end()), latency};
}

GenerationResult generate(const GenerationRequest& request, GenerationBackend& backend,
                          const GenerationOptions& options) {
  check_request(request);
  GenerationResult result;
  result.request = request;
  for (int attempt = 0;; ++attempt) {
    ++result.attempts;
    result.cost_units += options.cost_per_call;
    try {
      const GenerationReply reply = backend.synthesize(request);
      result.backend_latency += reply.latency_seconds;
      if (reply.latency_seconds > options.timeout_seconds) {
        throw Error(ErrorCode::Timeout, "generation took " + std::to_string(reply.latency_seconds) + " s");
      }
      try {
        result.audio = decode_wav(reply.wav);
      } catch (const Error& e) {
        throw Error(ErrorCode::ContractViolation, std::string("undecodable clip: ") + e.what());
      }
      break;
    } catch (const Error& e) {
      const bool transient = e.code() == ErrorCode::BackendUnavailable || e.code() == ErrorCode::Timeout;
      if (!transient || attempt >= options.retries) throw;
    }
  }
  const double expected = request.duration_seconds * kSampleRate;
  const auto frames = static_cast<double>(result.audio.frames());
  if (std::abs(frames - expected) > 0.01 * expected) {
    throw Error(ErrorCode::ContractViolation,
                "clip is " + std::to_string(frames / kSampleRate) + " s, expected 15 s +-1%");
  }
  return result;
}

}  // namespace framebeat
