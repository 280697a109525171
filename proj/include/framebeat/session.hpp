#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "framebeat/caption.hpp"
#include "framebeat/crossfade.hpp"
#include "framebeat/device.hpp"
#include "framebeat/engine.hpp"
#include "framebeat/generation.hpp"
#include "framebeat/mixing.hpp"
#include "framebeat/prompt.hpp"
#include "framebeat/runtime.hpp"

namespace framebeat {

struct SessionConfig {
  std::string session_id;  // generated when empty
  double lambda = 1.0;
  SelectionConfig selection;
  Time look_ahead{1, 4};
  bool auto_mix = false;
  std::size_t max_pending = 2;
  /// Tempo used when the first caption carries none.
  double default_bpm = 100.0;
  std::string default_genre = "ambient";
  /// Forces power_law(2.5) when a mood or the genre matches a keyword.
  bool ambient_power_law = false;
  std::vector<std::string> ambient_keywords{"ambient", "calm", "dreamy", "soft", "lush"};
  double caption_cost = 0.002;
  CaptionOptions caption;
  GenerationOptions generation;
  MixClientConfig mix;
  double master_target_db = -14.0;
  InstrumentSelection initial_instruments = InstrumentSelection::of({Instrument::Keys});
};

struct SessionBackends {
  CaptionBackend* caption = nullptr;
  GenerationBackend* generation = nullptr;
  MixBackend* mix = nullptr;
  CaptionTemplates templates = CaptionTemplates::builtin();
  PromptTables tables = PromptTables::builtin();
};

/// Event kinds: capture, caption_ready, generation_ready, section_scheduled,
/// mix_submitted, swap_scheduled, swap_committed, control, error.
struct SessionEvent {
  std::uint64_t seq = 0;
  double at = 0.0;
  std::string kind;
  nlohmann::json payload;
};

nlohmann::json to_json(const SessionEvent& e);
SessionEvent event_from_json(const nlohmann::json& j);

/// Append-only, totally ordered, thread-safe. Sequence numbers start at 1.
class EventLog {
 public:
  static constexpr const char* kSchema = "framebeat.session-log";
  static constexpr int kVersion = 1;

  std::uint64_t append(std::string kind, double at, nlohmann::json payload);
  std::vector<SessionEvent> since(std::uint64_t after_seq) const;
  std::vector<SessionEvent> all() const { return since(0); }
  std::uint64_t last_seq() const;
  /// Blocks until an event newer than `after_seq` exists or the timeout ends.
  bool wait_for(std::uint64_t after_seq, std::chrono::milliseconds timeout) const;

  /// Line-delimited JSON: a header line, then one event per line.
  void write_jsonl(std::ostream& out, const nlohmann::json& header_extra) const;
  void save(const std::string& path, const nlohmann::json& header_extra) const;

 private:
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::vector<SessionEvent> events_;
};

struct RecordedSession {
  nlohmann::json header;
  std::vector<SessionEvent> events;

  static RecordedSession parse(std::istream& in);
  static RecordedSession load(const std::string& path);
};

enum class CaptureState { Captioning, AwaitingLock, Generating, Ready, Scheduled, Failed };
std::string to_string(CaptureState s);

struct CaptureHandle {
  std::size_t capture_index = 0;
  std::uint64_t frame_hash = 0;
};

struct CaptureRecord {
  std::size_t index = 0;
  CaptureFrame frame;
  InstrumentSelection instruments;
  CaptureState state = CaptureState::Captioning;
  std::optional<SceneCaption> caption;
  std::optional<PromptRecord> prompt;
  std::optional<GenerationResult> generation;
  std::optional<std::size_t> section_index;
  std::string error;
  int caption_calls = 0;
  int generation_attempts = 0;
  double captured_at = 0.0;
  std::optional<double> caption_ready_at;
  std::optional<double> generation_started_at;
  std::optional<double> generation_ready_at;
  std::optional<double> scheduled_at;
  /// Wall time spent in this capture's pipeline code, split by stage.
  double caption_processing = 0.0;
  double generation_processing = 0.0;
  double schedule_processing = 0.0;
};

struct StageStats {
  std::vector<double> samples;
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
  static StageStats of(std::vector<double> samples);
  nlohmann::json to_json(double bin_seconds) const;
};

struct LatencyReport {
  std::size_t sections = 0;
  bool simulated_clock = true;
  StageStats caption;
  StageStats generation;
  StageStats schedule;
  StageStats end_to_end;
  double caption_cost = 0.0;
  double generation_cost = 0.0;
  double mix_cost = 0.0;
  double master_cost = 0.0;
  double total_cost() const { return caption_cost + generation_cost + mix_cost + master_cost; }
  nlohmann::json to_json() const;
};

/// The session state machine. Every method must be called on the runtime's
/// owner (use Runtime::invoke from other threads).
class Orchestrator {
 public:
  Orchestrator(Runtime& runtime, SessionBackends backends, SessionConfig config = {});
  ~Orchestrator();
  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  void start();
  void stop();
  bool active() const noexcept { return active_; }
  const std::string& id() const noexcept { return config_.session_id; }

  /// Throws SessionNotActive, BackPressure (max_pending captures in flight).
  CaptureHandle handle_capture(CaptureFrame frame, const InstrumentSelection& sel);
  CaptureHandle handle_capture(CaptureFrame frame) { return handle_capture(std::move(frame), instruments_); }

  void set_auto_mix(bool enabled);
  bool auto_mix() const noexcept { return config_.auto_mix; }
  void select_instruments(const InstrumentSelection& sel);
  const InstrumentSelection& instruments() const noexcept { return instruments_; }
  /// Toggles one instrument from the controller; ignores toggles that would
  /// leave 0 or more than 3 instruments.
  bool toggle_instrument(Instrument instrument);
  /// Throws InvalidState with no sections.
  const MixJob& request_master();
  /// Offline render of the whole session, t_K + L_K long.
  AudioBuffer export_render() const;

  /// Reports swaps whose boundary the playhead passed.
  void tick();
  /// Drives playback on the runtime: every block the engine renders (or
  /// just advances) and tick() runs. For simulation.
  void start_playback(bool render_audio, std::size_t block_frames = 512);
  void stop_playback();

  std::size_t pending_captures() const;
  bool idle() const;
  const std::vector<CaptureRecord>& captures() const noexcept { return captures_; }
  std::optional<SessionClock> clock() const { return clock_; }
  const std::optional<std::string>& genre() const noexcept { return genre_; }
  LoopEngine& engine() noexcept { return engine_; }
  const LoopEngine& engine() const noexcept { return engine_; }
  MixClient& mixer() noexcept { return mixer_; }
  const EventLog& events() const noexcept { return log_; }
  EventLog& events() noexcept { return log_; }
  nlohmann::json log_header() const;

  DisplayState display_state(int audio_level = 0) const;
  nlohmann::json snapshot(int audio_level = 0) const;
  LatencyReport latency_report() const;

  std::uint64_t underruns() const { return engine_.underruns(); }

 private:
  void emit(const std::string& kind, nlohmann::json payload);
  void fail_capture(CaptureRecord& rec, const std::string& stage, const std::exception& e);
  void on_caption(std::size_t index, std::shared_ptr<CaptionOutcome> outcome, std::exception_ptr error);
  void on_generation(std::size_t index, std::shared_ptr<GenerationResult> result, std::exception_ptr error);
  void advance_pipeline();
  void start_generation(CaptureRecord& rec);
  void schedule_ready();
  void schedule(CaptureRecord& rec);
  void maybe_auto_mix();
  void submit_preview();
  void submit_master();
  void on_mix_ready(const MixJob& job);
  void on_mix_failed(const MixJob& job);
  std::size_t sections_expected_before(std::size_t capture_index) const;
  void playback_step(std::shared_ptr<bool> alive, bool render_audio, std::size_t block_frames, double origin,
                     std::uint64_t n);

  Runtime& runtime_;
  SessionBackends backends_;
  SessionConfig config_;
  LoopEngine engine_;
  MixClient mixer_;
  EventLog log_;
  bool active_ = false;
  InstrumentSelection instruments_;
  std::vector<CaptureRecord> captures_;
  std::optional<SessionClock> clock_;
  std::optional<std::string> genre_;
  std::vector<ScheduledSection> sections_;
  bool master_requested_ = false;
  std::map<std::uint64_t, std::uint64_t> swap_jobs_;  // swap ticket -> mix job
  std::shared_ptr<bool> playback_alive_;
};

/// Rebuilds a session from its event log with the mock backends and renders
/// it. Regenerated audio is checked against the logged fingerprints; any
/// divergence throws InvalidState.
AudioBuffer replay_render(const RecordedSession& session);

}  // namespace framebeat
