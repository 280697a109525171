#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "framebeat/audio.hpp"
#include "framebeat/crossfade.hpp"
#include "framebeat/timeline.hpp"

namespace framebeat {

/// One generated section on the session timeline.
///
/// `start_time` is the nominal start from the overlap chain
/// t_{k+1} = t_k + L_k - T_cf; audio sample 0 of the section plays there and
/// its first T_cf overlaps the previous section's last T_cf. `downbeat` is the
/// nominal start quantized to the bar grid and is the time reported as the
/// committed splice point.
struct ScheduledSection {
  std::size_t index = 0;
  std::size_t capture_index = 0;
  int bar_count = 0;
  Time length;
  Time start_time;
  Time downbeat;
  std::shared_ptr<const AudioBuffer> buffer;
  SectionRole role = SectionRole::Verse;
  CrossfadePlan crossfade;
  std::string prompt;

  double length_seconds() const { return to_seconds(length); }
  double start_seconds() const { return to_seconds(start_time); }
  Time end_time() const { return start_time + length; }
};

/// Everything the engine needs to place a new section.
struct SectionDraft {
  std::size_t capture_index = 0;
  int bar_count = 0;
  std::shared_ptr<const AudioBuffer> buffer;  // already truncated to bar_count bars
  SectionRole role = SectionRole::Verse;
  CrossfadePlan crossfade;
  std::string prompt;
};

enum class SwapReason { PreviewMix, Mastered, Manual };
std::string to_string(SwapReason reason);
bool parse_swap_reason(std::string_view text, SwapReason& out);

struct HotSwapRequest {
  std::shared_ptr<const AudioBuffer> replacement;
  Time earliest_time;
  SwapReason reason = SwapReason::Manual;
  /// Sections [0, covers_sections) are contained in the replacement. The
  /// replacement stops sounding when a later section starts.
  std::size_t covers_sections = 0;
};

enum class SwapStatus { Pending, Committed, Superseded };

struct SwapTicket {
  std::uint64_t id = 0;
  Time boundary;
};

struct SwapCommit {
  SwapTicket ticket;
  SwapReason reason = SwapReason::Manual;
  std::size_t covers_sections = 0;
  std::uint64_t replacement_fingerprint = 0;
};

struct EngineConfig {
  Time look_ahead{1, 4};
  std::size_t block_frames = 512;
};

/// Immutable playback program. Rendering is a pure function of the program
/// and the absolute sample position, so offline and block-wise rendering
/// produce identical samples.
class Program {
 public:
  struct Slot {
    std::shared_ptr<const AudioBuffer> buffer;
    EnvelopeFamily family = EnvelopeFamily::equal_power();
    Time length;
  };
  struct Placement {
    std::size_t section = 0;
    Time start;
    std::int64_t start_sample = 0;
  };
  struct Swap {
    std::uint64_t id = 0;
    std::int64_t boundary_sample = 0;
    std::shared_ptr<const AudioBuffer> replacement;
    std::size_t covers_sections = 0;
    std::int64_t loop_frames = 0;
    std::int64_t phase_offset = 0;
    // First later section that takes over from the replacement.
    std::int64_t end_sample = 0;
    std::int64_t end_window = 0;
    std::size_t end_section = 0;
  };

  std::optional<SessionClock> clock;
  Time crossfade;
  std::int64_t window_samples = 0;
  std::vector<Slot> slots;
  std::vector<Placement> placements;
  std::vector<Swap> swaps;  // sorted by boundary

  bool playing() const noexcept { return !placements.empty(); }
  /// End of the last explicitly placed section (t_K + L_K) in samples.
  std::int64_t end_sample() const;

  void render(std::int64_t start, std::span<float> left, std::span<float> right) const;
  AudioBuffer render(std::int64_t start, std::size_t frames) const;

 private:
  struct Frame {
    float l = 0.0f;
    float r = 0.0f;
  };
  Placement placement_at(std::size_t i) const;
  std::size_t locate(std::int64_t p) const;
  std::int64_t frames_of(const Placement& pl) const;
  void resolve_swap_end(Swap& swap) const;
  friend class LoopEngine;
  Frame arrangement(std::int64_t p) const;
  Frame replacement(const Swap& swap, std::int64_t p) const;
  Frame layer(std::int64_t p, std::size_t swaps_active) const;
  Frame sample(std::int64_t p) const;
};

struct RenderStats {
  std::size_t frames = 0;
  bool underrun = false;
};

/// Loop playback engine: owns the timeline, places sections, applies
/// hot-swaps at bar boundaries, and renders.
///
/// Control calls serialize on an internal mutex and publish a fresh Program
/// snapshot; render() only loads the latest snapshot and never takes that
/// mutex.
class LoopEngine {
 public:
  explicit LoopEngine(EngineConfig config = {});

  /// Locks the session tempo. Must precede append_section.
  void set_clock(const SessionClock& clock);
  std::optional<SessionClock> clock() const;
  Time crossfade() const;
  const EngineConfig& config() const noexcept { return config_; }

  /// Places a section after the current last one (following the last
  /// section's self-loop repetitions when the playhead has moved on), or at
  /// `start` when replaying a recorded session.
  ScheduledSection append_section(const SectionDraft& draft, std::optional<Time> start = std::nullopt);
  std::vector<ScheduledSection> sections() const;

  /// Commits at the first bar boundary >= max(earliest, playhead) + look-ahead.
  /// A pending request of the same reason is superseded.
  SwapTicket request_hot_swap(const HotSwapRequest& request);
  /// Replays a swap at a recorded boundary.
  SwapTicket schedule_hot_swap_at(const HotSwapRequest& request, const Time& boundary);
  SwapStatus swap_status(std::uint64_t id) const;
  /// Boundary of a committed swap; throws SwapSupersededError when superseded.
  Time swap_result(std::uint64_t id) const;
  /// Swaps whose boundary the playhead has reached since the last call.
  std::vector<SwapCommit> poll_commits();

  /// Audio callback. Renders from the latest snapshot and advances the
  /// playhead once playback has started.
  RenderStats render(std::span<float> left, std::span<float> right);
  /// Advances the playhead without producing audio (simulation).
  void advance(std::int64_t frames);
  std::int64_t playhead() const noexcept { return playhead_.load(); }
  Time playhead_time() const { return from_samples(playhead()); }
  std::uint64_t underruns() const noexcept { return underruns_.load(); }

  std::shared_ptr<const Program> snapshot() const;
  /// Offline render of [0, t_K + L_K).
  AudioBuffer render_session() const;
  /// Offline render of the first `placement_count` placements without
  /// hot-swaps (the mastering input).
  AudioBuffer render_arrangement(std::size_t placement_count) const;
  std::size_t placement_count() const;

 private:
  struct PendingSwap {
    SwapTicket ticket;
    HotSwapRequest request;
    SwapStatus status = SwapStatus::Pending;
    bool reported = false;
  };

  void publish_locked();
  Program::Swap make_swap_locked(const PendingSwap& pending) const;
  SwapTicket insert_swap_locked(const HotSwapRequest& request, const Time& boundary);

  EngineConfig config_;
  mutable std::mutex mutex_;
  std::optional<SessionClock> clock_;
  std::vector<ScheduledSection> sections_;
  std::vector<Program::Placement> placements_;
  std::map<std::uint64_t, PendingSwap> swaps_;
  std::uint64_t next_swap_id_ = 1;
  std::shared_ptr<const Program> snapshot_;
  std::atomic<std::int64_t> playhead_{0};
  std::atomic<std::uint64_t> underruns_{0};
};

}  // namespace framebeat
