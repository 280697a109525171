#include "framebeat/crossfade.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "framebeat/error.hpp"

namespace framebeat {

EnvelopeFamily EnvelopeFamily::power_law(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::InvalidEnvelope, "power-law alpha must be positive");
  }
  return EnvelopeFamily(EnvelopeKind::PowerLaw, alpha);
}

std::string EnvelopeFamily::describe() const {
  if (kind_ == EnvelopeKind::EqualPower) return "equal_power";
  char buf[48];
  std::snprintf(buf, sizeof buf, "power_law(%g)", alpha_);
  return buf;
}

CrossfadePlan CrossfadePlan::make(EnvelopeFamily family, double seconds) {
  CrossfadePlan plan;
  plan.family = family;
  plan.window_len_seconds = seconds;
  const long long n = std::llround(seconds * kSampleRate);
  plan.window_len_samples = static_cast<std::size_t>(std::max(1LL, n));
  return plan;
}

Gains envelope_gains(const EnvelopeFamily& family, std::size_t n, std::size_t window) {
  if (window == 0 || n > window) {
    throw Error(ErrorCode::IndexOutOfWindow,
                "n=" + std::to_string(n) + " outside window of " + std::to_string(window));
  }
  // Endpoints are exact for both families.
  if (n == 0) return {1.0, 0.0};
  if (n == window) return {0.0, 1.0};
  const double u = static_cast<double>(n) / static_cast<double>(window);
  if (family.kind() == EnvelopeKind::EqualPower) {
    const double phase = std::numbers::pi * u / 2.0;
    return {std::cos(phase), std::sin(phase)};
  }
  return {std::pow(1.0 - u, family.alpha()), std::pow(u, family.alpha())};
}

AudioBuffer splice(const AudioBuffer& outgoing, const AudioBuffer& incoming, const CrossfadePlan& plan) {
  const std::size_t window = plan.window_len_samples;
  if (outgoing.frames() < window || incoming.frames() < window) {
    throw Error(ErrorCode::WindowExceedsBuffer, "crossfade window of " + std::to_string(window) +
                                                    " frames exceeds splice input");
  }
  const std::size_t out_start = outgoing.frames() - window;
  AudioBuffer z(window);
  for (std::size_t n = 0; n < window; ++n) {
    const Gains g = envelope_gains(plan.family, n, window);
    for (int c = 0; c < kChannels; ++c) {
      const double v = g.out * outgoing.at(c, out_start + n) + g.in * incoming.at(c, n);
      z.at(c, n) = static_cast<float>(std::clamp(v, -1.0, 1.0));
    }
  }
  return z;
}

double transient_cost(std::span<const float> region, double threshold) {
  double cost = 0.0;
  for (std::size_t n = 1; n < region.size(); ++n) {
    const double excess = std::abs(static_cast<double>(region[n]) - region[n - 1]) - threshold;
    if (excess > 0.0) cost += excess * excess;
  }
  return cost;
}

SpliceContext make_splice_context(const AudioBuffer& outgoing, const AudioBuffer& incoming, std::size_t window,
                                  SectionRole incoming_role, double lambda) {
  if (outgoing.frames() < window || incoming.frames() < window) {
    throw Error(ErrorCode::WindowExceedsBuffer, "splice context window exceeds input");
  }
  constexpr double kFloorDb = -120.0;
  SpliceContext ctx;
  ctx.section_role = incoming_role;
  ctx.lambda = lambda;
  ctx.p_target = rms_power(outgoing, outgoing.frames() - window, window);
  const PowerMeasure head = rms_power(incoming, 0, window);
  ctx.delta_p_db = std::max(head.rms_db, kFloorDb) - std::max(ctx.p_target.rms_db, kFloorDb);
  return ctx;
}

SpliceCost evaluate_splice(const EnvelopeFamily& family, const SpliceContext& ctx, const AudioBuffer& outgoing,
                           const AudioBuffer& incoming, std::size_t window, const TransientConfig& transient) {
  const AudioBuffer z = splice(outgoing, incoming, CrossfadePlan{family, window, window / double(kSampleRate)});
  const std::vector<float> z_mono = z.mono_mix();
  const double target = ctx.p_target.power();

  SpliceCost cost;
  for (float s : z_mono) {
    const double dev = static_cast<double>(s) * s - target;
    cost.loudness_mismatch += dev * dev;
  }

  const std::size_t pre = std::min(transient.guard, outgoing.frames() - window);
  const std::size_t post = std::min(transient.guard, incoming.frames() - window);
  std::vector<float> region;
  region.reserve(pre + window + post);
  if (pre > 0) {
    const auto before = outgoing.slice(outgoing.frames() - window - pre, pre).mono_mix();
    region.insert(region.end(), before.begin(), before.end());
  }
  region.insert(region.end(), z_mono.begin(), z_mono.end());
  if (post > 0) {
    const auto after = incoming.slice(window, post).mono_mix();
    region.insert(region.end(), after.begin(), after.end());
  }
  cost.transient_cost = transient_cost(region, transient.threshold);
  cost.total = cost.loudness_mismatch + ctx.lambda * cost.transient_cost;
  return cost;
}

EnvelopeChoice select_envelope(const SpliceContext& ctx, const AudioBuffer& outgoing, const AudioBuffer& incoming,
                               std::size_t window, const SelectionConfig& config) {
  if (ctx.lambda < 0.0) throw Error(ErrorCode::InvalidEnvelope, "lambda must be nonnegative");
  std::vector<EnvelopeFamily> candidates{EnvelopeFamily::equal_power()};
  std::vector<double> grid = config.alpha_grid;
  std::sort(grid.begin(), grid.end());
  for (double a : grid) candidates.push_back(EnvelopeFamily::power_law(a));

  EnvelopeChoice best;
  bool first = true;
  for (const auto& family : candidates) {
    const SpliceCost cost = evaluate_splice(family, ctx, outgoing, incoming, window, config.transient);
    if (first || cost.total < best.cost.total) {
      best = {family, cost};
      first = false;
    }
  }
  return best;
}

}  // namespace framebeat
