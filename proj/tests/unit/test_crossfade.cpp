#include <doctest.h>

#include <cmath>
#include <random>

#include "framebeat/crossfade.hpp"
#include "framebeat/error.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace framebeat;

TEST_CASE("equal-power gains sum to unit power") {
  for (std::size_t N : {64u, 441u, 44100u}) {
    double worst = 0.0;
    for (std::size_t n = 0; n <= N; ++n) {
      const Gains g = envelope_gains(EnvelopeFamily::equal_power(), n, N);
      worst = std::max(worst, std::abs(g.out * g.out + g.in * g.in - 1.0));
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("envelope endpoints and monotonicity") {
  for (auto fam : {EnvelopeFamily::equal_power(), EnvelopeFamily::power_law(1.5), EnvelopeFamily::power_law(3.0)}) {
    const Gains a = envelope_gains(fam, 0, 100);
    const Gains b = envelope_gains(fam, 100, 100);
    CHECK(a.out == 1.0);
    CHECK(a.in == 0.0);
    CHECK(b.out == 0.0);
    CHECK(b.in == 1.0);
    for (std::size_t n = 1; n <= 100; ++n) {
      CHECK(envelope_gains(fam, n, 100).in >= envelope_gains(fam, n - 1, 100).in);
      CHECK(envelope_gains(fam, n, 100).out <= envelope_gains(fam, n - 1, 100).out);
    }
  }
}

TEST_CASE("power-law midpoint gain") {
  const Gains g = envelope_gains(EnvelopeFamily::power_law(2.5), 50, 100);
  CHECK(std::abs(g.out - std::pow(0.5, 2.5)) <= 1e-9);
  CHECK(std::abs(g.in - std::pow(0.5, 2.5)) <= 1e-9);
}

TEST_CASE("envelope_gains rejects positions outside the window") {
  CHECK_THROWS_AS(envelope_gains(EnvelopeFamily::equal_power(), 101, 100), Error);
  CHECK_THROWS_AS(envelope_gains(EnvelopeFamily::equal_power(), 0, 0), Error);
  CHECK_THROWS_AS(EnvelopeFamily::power_law(0.0), Error);
  CHECK_THROWS_AS(EnvelopeFamily::power_law(-1.0), Error);
}

TEST_CASE("CrossfadePlan rounds to samples") {
  CHECK(CrossfadePlan::make(EnvelopeFamily::equal_power(), 1.0).window_len_samples == 44100);
  CHECK(CrossfadePlan::make(EnvelopeFamily::equal_power(), 4.0 / 3.0).window_len_samples == 58800);
  CHECK(CrossfadePlan::make(EnvelopeFamily::equal_power(), 0.0).window_len_samples == 1);
}

TEST_CASE("splice mixes the outgoing tail with the incoming head") {
  const AudioBuffer out = fbtest::constant(300, 0.5f);
  const AudioBuffer in = fbtest::constant(200, -0.25f);
  const CrossfadePlan plan{EnvelopeFamily::power_law(2.0), 100, 100.0 / 44100};
  const AudioBuffer z = splice(out, in, plan);
  REQUIRE(z.frames() == 100);
  for (std::size_t n = 0; n < 100; ++n) {
    const double u = n / 100.0;
    const double expect = std::pow(1 - u, 2.0) * 0.5 + std::pow(u, 2.0) * -0.25;
    CHECK(z.at(0, n) == doctest::Approx(expect).epsilon(1e-6));
  }
  CHECK_THROWS_AS(splice(out, fbtest::constant(50, 0.0f), plan), Error);
}

TEST_CASE("splice clamps the sum") {
  const AudioBuffer z = splice(fbtest::constant(10, 1.0f), fbtest::constant(10, 1.0f),
                               CrossfadePlan{EnvelopeFamily::equal_power(), 10, 10.0 / 44100});
  for (float v : z.channel(0)) CHECK(v <= 1.0f);
}

TEST_CASE("equal-power splice of equal-RMS noise holds its level") {
  const std::size_t N = 44100;
  const AudioBuffer out = fbtest::noise(N, 0.3, 1);
  const AudioBuffer in = fbtest::noise(N, 0.3, 2);
  const AudioBuffer z = splice(out, in, CrossfadePlan{EnvelopeFamily::equal_power(), N, 1.0});
  const double ref = 20 * std::log10(fbtest::rms_of(out));
  const std::size_t block = 4410;
  for (std::size_t s = 0; s + block <= N; s += block) {
    const double db = 20 * std::log10(fbtest::rms_of(z.slice(s, block)));
    CHECK(std::abs(db - ref) <= 1.5);
  }
}

TEST_CASE("transient_cost is thresholded squared first difference") {
  const std::vector<float> flat(10, 0.3f);
  CHECK(transient_cost(flat, 0.05) == 0.0);
  const std::vector<float> step{0.0f, 0.0f, 0.5f, 0.5f};
  CHECK(transient_cost(step, 0.05) == doctest::Approx(0.45 * 0.45));
  const std::vector<float> small{0.0f, 0.04f, 0.0f};
  CHECK(transient_cost(small, 0.05) == 0.0);
}

TEST_CASE("make_splice_context measures the window powers") {
  const AudioBuffer out = fbtest::constant(1000, 0.1f);
  const AudioBuffer in = fbtest::constant(1000, 0.2f);
  const SpliceContext ctx = make_splice_context(out, in, 500, SectionRole::Chorus, 0.5);
  CHECK(ctx.p_target.rms == doctest::Approx(0.1));
  CHECK(ctx.delta_p_db == doctest::Approx(20 * std::log10(2.0)).epsilon(1e-6));
  CHECK(ctx.section_role == SectionRole::Chorus);
  const SpliceContext silent = make_splice_context(AudioBuffer(1000), in, 500, SectionRole::Verse, 1.0);
  CHECK(std::isfinite(silent.delta_p_db));
}

TEST_CASE("evaluate_splice agrees with the oracle cost") {
  const AudioBuffer out = fbtest::noise(3000, 0.4, 7);
  const AudioBuffer in = fbtest::noise(3000, 0.1, 8);
  const SpliceContext ctx = make_splice_context(out, in, 2000, SectionRole::Verse, 2.0);
  const TransientConfig tc{0.05, 256};
  for (const auto& c : fbtest::oracle_grid({1.5, 2.0, 2.5, 3.0})) {
    const EnvelopeFamily fam = c.equal_power ? EnvelopeFamily::equal_power() : EnvelopeFamily::power_law(c.alpha);
    const SpliceCost got = evaluate_splice(fam, ctx, out, in, 2000, tc);
    const fbtest::OracleCost want = fbtest::oracle_cost(c, out, in, 2000, 2.0, 0.05, 256);
    CHECK(got.loudness_mismatch == doctest::Approx(want.loudness).epsilon(1e-9));
    CHECK(got.transient_cost == doctest::Approx(want.transient).epsilon(1e-9));
    CHECK(got.total == got.loudness_mismatch + 2.0 * got.transient_cost);
  }
}

TEST_CASE("steady matched-level material selects equal power") {
  const std::size_t N = 4410;
  const AudioBuffer out = fbtest::noise(N + 256, 0.02, 21);
  const AudioBuffer in = fbtest::noise(N + 256, 0.02, 22);
  const auto grid = fbtest::oracle_grid({1.5, 2.0, 2.5, 3.0});
  REQUIRE(fbtest::oracle_argmin(grid, out, in, N, 1.0, 0.05, 256) == 0);
  const SpliceContext ctx = make_splice_context(out, in, N, SectionRole::Verse, 1.0);
  CHECK(select_envelope(ctx, out, in, N).family == EnvelopeFamily::equal_power());
}

TEST_CASE("quiet pad into a 6 dB louder restatement selects power law 2.5") {
  const std::size_t N = 4410;
  const AudioBuffer out = fbtest::constant(N + 256, 0.1f);
  const AudioBuffer in = fbtest::constant(N + 256, 0.2f);
  const auto grid = fbtest::oracle_grid({1.5, 2.0, 2.5, 3.0});
  const std::size_t want = fbtest::oracle_argmin(grid, out, in, N, 1.0, 0.05, 256);
  REQUIRE(!grid[want].equal_power);
  REQUIRE(grid[want].alpha == 2.5);
  const SpliceContext ctx = make_splice_context(out, in, N, SectionRole::Chorus, 1.0);
  const EnvelopeChoice got = select_envelope(ctx, out, in, N);
  CHECK(got.family == EnvelopeFamily::power_law(2.5));
}

TEST_CASE("select_envelope matches brute force on random fixtures") {
  std::mt19937 rng(1234);
  const auto grid = fbtest::oracle_grid({1.5, 2.0, 2.5, 3.0});
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t N = 200 + rng() % 800;
    const double lambda = std::uniform_real_distribution<double>(0.0, 5.0)(rng);
    const AudioBuffer out = fbtest::noise(N + rng() % 300, std::uniform_real_distribution<double>(0.01, 0.6)(rng), rng());
    const AudioBuffer in = fbtest::noise(N + rng() % 300, std::uniform_real_distribution<double>(0.01, 0.6)(rng), rng());
    const SpliceContext ctx = make_splice_context(out, in, N, SectionRole::Verse, lambda);
    const EnvelopeChoice got = select_envelope(ctx, out, in, N);
    const auto& want = grid[fbtest::oracle_argmin(grid, out, in, N, lambda, 0.05, 256)];
    const EnvelopeFamily wf = want.equal_power ? EnvelopeFamily::equal_power() : EnvelopeFamily::power_law(want.alpha);
    CHECK(got.family == wf);
  }
}

TEST_CASE("select_envelope rejects a negative lambda") {
  const AudioBuffer b = fbtest::constant(100, 0.1f);
  SpliceContext ctx = make_splice_context(b, b, 50, SectionRole::Verse, 1.0);
  ctx.lambda = -1.0;
  CHECK_THROWS_AS(select_envelope(ctx, b, b, 50), Error);
}
