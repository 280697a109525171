#include "framebeat/timeline.hpp"

#include <cmath>

#include "framebeat/audio.hpp"
#include "framebeat/error.hpp"

namespace framebeat {

namespace {

std::int64_t floor_of(const Time& t) {
  const auto n = t.numerator();
  const auto d = t.denominator();  // boost keeps d > 0
  auto q = n / d;
  if (n % d != 0 && n < 0) --q;
  return q;
}

std::int64_t ceil_of(const Time& t) { return -floor_of(-t); }

}  // namespace

double to_seconds(const Time& t) { return boost::rational_cast<double>(t); }

std::int64_t to_samples(const Time& t) { return floor_of(t * Time(kSampleRate) + Time(1, 2)); }

Time from_samples(std::int64_t samples) { return Time(samples, kSampleRate); }

Time from_seconds(double seconds) { return Time(std::llround(seconds * 1e6), 1000000); }

std::string to_string(const Time& t) {
  if (t.denominator() == 1) return std::to_string(t.numerator());
  return std::to_string(t.numerator()) + "/" + std::to_string(t.denominator());
}

Time parse_time(const std::string& text) {
  try {
    const auto slash = text.find('/');
    if (slash == std::string::npos) return Time(std::stoll(text));
    return Time(std::stoll(text.substr(0, slash)), std::stoll(text.substr(slash + 1)));
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigError, "bad time value '" + text + "'");
  }
}

SessionClock::SessionClock(Time bpm) : bpm_(bpm), beat_(Time(60) / bpm), bar_(Time(4) * Time(60) / bpm) {}

SessionClock SessionClock::from_bpm(double bpm) {
  if (!std::isfinite(bpm) || bpm < kMinBpm || bpm > kMaxBpm) {
    throw Error(ErrorCode::TempoOutOfRange, "tempo " + std::to_string(bpm) + " outside [40, 240] BPM");
  }
  return SessionClock(Time(std::llround(bpm * 1000.0), 1000));
}

Time crossfade_window(const SessionClock& clock) {
  const Time scaled = Time(120) / clock.bpm_exact();
  const Time floor_window(3, 10);
  return scaled > floor_window ? scaled : floor_window;
}

double crossfade_window_seconds(double bpm) { return to_seconds(crossfade_window(SessionClock::from_bpm(bpm))); }

int fit_bars(const Time& clip, const SessionClock& clock) {
  if (clip < clock.bar()) {
    throw Error(ErrorCode::ClipShorterThanBar,
                "clip of " + std::to_string(to_seconds(clip)) + " s is shorter than one bar");
  }
  return static_cast<int>(floor_of(clip / clock.bar()));
}

int fit_bars(double clip_seconds, const SessionClock& clock) { return fit_bars(from_seconds(clip_seconds), clock); }

Time quantize_to_bar(const Time& t, const SessionClock& clock) {
  return Time(floor_of(t / clock.bar() + Time(1, 2))) * clock.bar();
}

Time next_bar_at_or_after(const Time& t, const SessionClock& clock) {
  return Time(ceil_of(t / clock.bar())) * clock.bar();
}

bool is_bar_aligned(const Time& t, const SessionClock& clock) { return (t / clock.bar()).denominator() == 1; }

NextStart schedule_next(const Time& prev_start, const Time& prev_length, const Time& crossfade,
                        const SessionClock& clock) {
  if (!(crossfade < prev_length)) {
    throw Error(ErrorCode::CrossfadeLongerThanSection, "crossfade of " + std::to_string(to_seconds(crossfade)) +
                                                           " s does not fit in a " +
                                                           std::to_string(to_seconds(prev_length)) + " s section");
  }
  NextStart next;
  next.nominal = prev_start + prev_length - crossfade;
  next.downbeat = quantize_to_bar(next.nominal, clock);
  return next;
}

}  // namespace framebeat
