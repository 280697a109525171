#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "framebeat/audio.hpp"
#include "framebeat/role.hpp"

namespace framebeat {

enum class EnvelopeKind { EqualPower, PowerLaw };

class EnvelopeFamily {
 public:
  static constexpr double kDefaultAlpha = 2.5;

  static EnvelopeFamily equal_power() { return EnvelopeFamily(EnvelopeKind::EqualPower, kDefaultAlpha); }
  /// Throws InvalidEnvelope unless alpha > 0.
  static EnvelopeFamily power_law(double alpha = kDefaultAlpha);

  EnvelopeKind kind() const noexcept { return kind_; }
  /// Only meaningful for the power-law family.
  double alpha() const noexcept { return alpha_; }

  std::string describe() const;

  friend bool operator==(const EnvelopeFamily& a, const EnvelopeFamily& b) noexcept {
    if (a.kind_ != b.kind_) return false;
    return a.kind_ == EnvelopeKind::EqualPower || a.alpha_ == b.alpha_;
  }

 private:
  EnvelopeFamily(EnvelopeKind kind, double alpha) : kind_(kind), alpha_(alpha) {}
  EnvelopeKind kind_;
  double alpha_;
};

struct CrossfadePlan {
  EnvelopeFamily family = EnvelopeFamily::equal_power();
  std::size_t window_len_samples = 1;
  double window_len_seconds = 1.0 / kSampleRate;

  /// window_len_samples = max(1, round(seconds * 44100)).
  static CrossfadePlan make(EnvelopeFamily family, double seconds);
};

struct Gains {
  double out = 1.0;
  double in = 0.0;
};

/// Gain pair at position n of an N-sample window, 0 <= n <= N.
Gains envelope_gains(const EnvelopeFamily& family, std::size_t n, std::size_t window);

/// Mixes the last N frames of `outgoing` with the first N frames of
/// `incoming` and returns the N-frame overlap, clamped to [-1, 1].
AudioBuffer splice(const AudioBuffer& outgoing, const AudioBuffer& incoming, const CrossfadePlan& plan);

struct TransientConfig {
  double threshold = 0.05;
  std::size_t guard = 256;
};

/// Sum of max(0, |z[n] - z[n-1]| - threshold)^2 over the region.
double transient_cost(std::span<const float> region, double threshold);

struct SpliceContext {
  double delta_p_db = 0.0;
  SectionRole section_role = SectionRole::Verse;
  PowerMeasure p_target;
  double lambda = 1.0;
};

struct SpliceCost {
  double loudness_mismatch = 0.0;
  double transient_cost = 0.0;
  double total = 0.0;
};

struct SelectionConfig {
  std::vector<double> alpha_grid{1.5, 2.0, 2.5, 3.0};
  TransientConfig transient;
};

/// Builds the context for a splice: P_target is the outgoing tail power over
/// the window and delta_p_db compares incoming head power with it.
SpliceContext make_splice_context(const AudioBuffer& outgoing, const AudioBuffer& incoming, std::size_t window,
                                  SectionRole incoming_role, double lambda);

/// Cost of one candidate. `outgoing` supplies the window as its last N frames
/// and up to `guard` frames before it; `incoming` supplies the window as its
/// first N frames and up to `guard` frames after it.
SpliceCost evaluate_splice(const EnvelopeFamily& family, const SpliceContext& ctx, const AudioBuffer& outgoing,
                           const AudioBuffer& incoming, std::size_t window, const TransientConfig& transient);

struct EnvelopeChoice {
  EnvelopeFamily family = EnvelopeFamily::equal_power();
  SpliceCost cost;
};

/// Minimizes loudness mismatch + lambda * transient cost over equal-power and
/// the power-law alpha grid. Ties go to equal-power, then to smaller alpha.
EnvelopeChoice select_envelope(const SpliceContext& ctx, const AudioBuffer& outgoing, const AudioBuffer& incoming,
                               std::size_t window, const SelectionConfig& config = {});

}  // namespace framebeat
