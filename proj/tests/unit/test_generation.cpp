#include <doctest.h>

#include <cmath>

#include "framebeat/error.hpp"
#include "framebeat/generation.hpp"
#include "support.hpp"

using namespace framebeat;

namespace {

GenerationRequest req(const std::string& prompt, double bpm) {
  GenerationRequest r;
  r.prompt = prompt;
  r.bpm_hint = bpm;
  return r;
}

// Local maxima of |x| above `floor`, at least `gap` samples apart.
std::vector<std::size_t> peaks(std::span<const float> x, double floor, std::size_t gap) {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double v = std::abs(x[n]);
    if (v < floor) continue;
    if (n > 0 && std::abs(x[n - 1]) > v) continue;
    if (n + 1 < x.size() && std::abs(x[n + 1]) > v) continue;
    if (!out.empty() && n - out.back() < gap) continue;
    out.push_back(n);
  }
  return out;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("instruments are read from the head of the prompt") {
  CHECK(instruments_in_prompt("keys, guitar section, night, moody") ==
        std::vector<Instrument>{Instrument::Keys, Instrument::Guitar});
  CHECK(instruments_in_prompt("percussion intro section, x") == std::vector<Instrument>{Instrument::Percussion});
  CHECK(instruments_in_prompt("a street, keys").empty());
}

TEST_CASE("percussion clicks land on every beat at 0.8") {
  for (double bpm : {60.0, 120.0}) {
    const AudioBuffer a = mock_synthesize(req("percussion section, x", bpm));
    CHECK(a.frames() == 15u * 44100u);
    const auto p = peaks(a.channel(0), 0.5, 1000);
    const double spacing = 60.0 / bpm * 44100.0;
    REQUIRE(p.size() == static_cast<std::size_t>(std::ceil(15.0 / (60.0 / bpm))));
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(std::abs(double(p[i]) - i * spacing) <= 1.0);
      CHECK(a.at(0, p[i]) == doctest::Approx(0.8).epsilon(1e-6));
    }
  }
}

TEST_CASE("keys are sustained with a 0.1 s attack and no transients") {
  const AudioBuffer a = mock_synthesize(req("keys section, x", 100));
  double max_diff = 0.0;
  for (std::size_t n = 1; n < a.frames(); ++n) max_diff = std::max(max_diff, double(std::abs(a.at(0, n) - a.at(0, n - 1))));
  CHECK(max_diff < 0.05);
  const double early = fbtest::rms_of(a.slice(0, 441));
  const double late = fbtest::rms_of(a.slice(44100, 4410));
  CHECK(early < 0.2 * late);
  CHECK(late > 0.1);
}

TEST_CASE("moody lowers the level by 6 dB") {
  const AudioBuffer plain = mock_synthesize(req("keys section, x", 100));
  const AudioBuffer moody = mock_synthesize(req("keys section, x, moody", 100));
  CHECK(20 * std::log10(fbtest::rms_of(moody) / fbtest::rms_of(plain)) == doctest::Approx(-6.0).epsilon(1e-3));
}

TEST_CASE("no instruments gives a -30 dBFS noise bed") {
  const AudioBuffer a = mock_synthesize(req("a quiet room", 100));
  CHECK(20 * std::log10(fbtest::rms_of(a)) == doctest::Approx(-30.0).epsilon(0.01));
}

TEST_CASE("bass is gated off for the last beat of each bar") {
  const AudioBuffer a = mock_synthesize(req("bass section, x", 120));
  // 120 BPM: bar 2 s, gate off over [1.5 s, 2 s)
  CHECK(fbtest::rms_of(a.slice(static_cast<std::size_t>(1.6 * 44100), 4410)) == 0.0);
  CHECK(fbtest::rms_of(a.slice(static_cast<std::size_t>(0.5 * 44100), 4410)) > 0.2);
}

TEST_CASE("mock synthesis is deterministic") {
  for (const char* prompt : {"keys, guitar section, night", "bass, percussion chorus section", "nothing here"}) {
    CHECK(mock_synthesize(req(prompt, 97)) == mock_synthesize(req(prompt, 97)));
  }
  CHECK_FALSE(mock_synthesize(req("x", 97)) == mock_synthesize(req("y", 97)));
}

TEST_CASE("generate enforces the contract") {
  MockGenerationBackend backend(3.8);
  const GenerationResult r = generate(req("keys section, x", 90), backend);
  CHECK(r.audio.frames() == 15u * 44100u);
  CHECK(r.backend_latency == 3.8);
  CHECK(r.cost_units == doctest::Approx(0.14));
  CHECK(r.attempts == 1);

  backend.truncate_next(10.0);
  CHECK(code_of([&] { generate(req("keys section, x", 90), backend); }) == ErrorCode::ContractViolation);
  backend.truncate_next(14.9);
  CHECK_NOTHROW(generate(req("keys section, x", 90), backend));

  GenerationRequest bad = req("x", 90);
  bad.duration_seconds = 10;
  CHECK(code_of([&] { generate(bad, backend); }) == ErrorCode::ContractViolation);
  CHECK(code_of([&] { generate(req("x", 300), backend); }) == ErrorCode::ContractViolation);
}

TEST_CASE("generate retries once on transient failures") {
  MockGenerationBackend backend;
  backend.fail_next(1);
  const GenerationResult r = generate(req("keys section, x", 90), backend);
  CHECK(r.attempts == 2);
  CHECK(r.cost_units == doctest::Approx(0.28));
  backend.fail_next(2);
  CHECK(code_of([&] { generate(req("keys section, x", 90), backend); }) == ErrorCode::BackendUnavailable);
  backend.set_latency(31.0);
  CHECK(code_of([&] { generate(req("keys section, x", 90), backend); }) == ErrorCode::Timeout);
  CHECK(backend.calls() == 6);
}

TEST_CASE("http generation backend reports transport failures") {
  HttpGenerationBackend backend({"http://127.0.0.1:1/generate", "", 0.5});
  CHECK(code_of([&] { backend.synthesize(req("x", 90)); }) == ErrorCode::BackendUnavailable);
}
