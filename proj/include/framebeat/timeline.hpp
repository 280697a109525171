#pragma once

#include <cstdint>
#include <string>

#include <boost/rational.hpp>

namespace framebeat {

/// Exact session time in seconds. Tempo-derived quantities (beat, bar,
/// crossfade window) are rational in the tempo, so the timeline arithmetic
/// never drifts and bar-boundary ties are decided exactly.
using Time = boost::rational<std::int64_t>;

double to_seconds(const Time& t);
/// Nearest sample index at 44.1 kHz, ties toward the later sample.
std::int64_t to_samples(const Time& t);
Time from_samples(std::int64_t samples);
/// Rounds to the nearest microsecond before converting.
Time from_seconds(double seconds);
std::string to_string(const Time& t);
Time parse_time(const std::string& text);

/// 4/4 tempo grid. The tempo is held at millibeat-per-minute resolution.
class SessionClock {
 public:
  static constexpr double kMinBpm = 40.0;
  static constexpr double kMaxBpm = 240.0;

  /// Throws TempoOutOfRange outside [40, 240].
  static SessionClock from_bpm(double bpm);

  double bpm() const { return boost::rational_cast<double>(bpm_); }
  const Time& bpm_exact() const noexcept { return bpm_; }
  /// 60 / bpm
  Time beat() const { return beat_; }
  /// 4 beats
  Time bar() const { return bar_; }
  double beat_seconds() const { return to_seconds(beat_); }
  double bar_seconds() const { return to_seconds(bar_); }

  friend bool operator==(const SessionClock&, const SessionClock&) = default;

 private:
  explicit SessionClock(Time bpm);
  Time bpm_;
  Time beat_;
  Time bar_;
};

/// max(120 / bpm, 0.3) seconds.
Time crossfade_window(const SessionClock& clock);
double crossfade_window_seconds(double bpm);

/// Whole bars of a clip: floor(clip / bar). Throws ClipShorterThanBar.
int fit_bars(const Time& clip, const SessionClock& clock);
int fit_bars(double clip_seconds, const SessionClock& clock);

/// Nearest bar boundary; exact halfway points go to the later boundary.
Time quantize_to_bar(const Time& t, const SessionClock& clock);
/// First bar boundary >= t.
Time next_bar_at_or_after(const Time& t, const SessionClock& clock);
bool is_bar_aligned(const Time& t, const SessionClock& clock);

struct NextStart {
  /// t_k + L_k - T_cf
  Time nominal;
  /// nominal quantized to the bar grid; the musical splice point
  Time downbeat;
};

/// Start of the section after one that starts at `prev_start` and lasts
/// `prev_length`. Throws CrossfadeLongerThanSection unless T_cf < L_k.
NextStart schedule_next(const Time& prev_start, const Time& prev_length, const Time& crossfade,
                        const SessionClock& clock);

}  // namespace framebeat
