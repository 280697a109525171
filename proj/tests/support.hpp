#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "framebeat/audio.hpp"
#include "framebeat/caption.hpp"
#include "framebeat/device.hpp"
#include "framebeat/error.hpp"

namespace fbtest {

inline std::string data_path(const std::string& rel) { return std::string(FRAMEBEAT_DATA_DIR) + "/" + rel; }

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline framebeat::CaptureFrame fixture_frame(const std::string& name) {
  return framebeat::CaptureFrame::from_jpeg(read_bytes(data_path("fixtures/images/" + name + ".jpg")));
}

inline const std::vector<std::string>& fixture_names() {
  static const std::vector<std::string> names{"night_street", "beach_morning", "forest_rain"};
  return names;
}

inline framebeat::AudioBuffer noise(std::size_t frames, double amplitude, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  std::vector<float> l(frames), r(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    l[i] = static_cast<float>(u(rng));
    r[i] = static_cast<float>(u(rng));
  }
  return framebeat::AudioBuffer(std::move(l), std::move(r));
}

inline framebeat::AudioBuffer constant(std::size_t frames, float value) {
  return framebeat::AudioBuffer(std::vector<float>(frames, value), std::vector<float>(frames, value));
}

inline double rms_of(const framebeat::AudioBuffer& b) {
  double s = 0.0;
  for (int c = 0; c < 2; ++c)
    for (float v : b.channel(c)) s += double(v) * v;
  return std::sqrt(s / (2.0 * double(b.frames())));
}

inline std::vector<framebeat::RawEdge> bouncy_presses(std::mt19937& rng, std::size_t presses) {
  std::vector<framebeat::RawEdge> edges;
  std::uint32_t t = 0;
  for (std::size_t i = 0; i < presses; ++i) {
    const auto b = static_cast<framebeat::Button>(rng() % framebeat::kButtonCount);
    t += 1 + rng() % 80;
    bool level = true;
    const int bounces = 1 + static_cast<int>(rng() % 6);
    for (int k = 0; k < bounces; ++k) {
      edges.push_back({b, level, t});
      level = !level;
      t += rng() % 8;
    }
    edges.push_back({b, true, t});
    t += 20 + rng() % 200;
    for (int k = 0; k < static_cast<int>(rng() % 4); ++k) {
      edges.push_back({b, false, t});
      t += rng() % 6;
      edges.push_back({b, true, t});
      t += rng() % 6;
    }
    edges.push_back({b, false, t});
  }
  std::stable_sort(edges.begin(), edges.end(), [](const framebeat::RawEdge& a, const framebeat::RawEdge& b) { return a.at_ms < b.at_ms; });
  return edges;
}

template <class Fn>
std::optional<framebeat::ErrorCode> code_of(Fn&& fn) {
  try {
    fn();
  } catch (const framebeat::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace fbtest
