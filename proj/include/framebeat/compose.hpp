#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "framebeat/config.hpp"
#include "framebeat/session.hpp"

namespace framebeat {

struct ComposeOptions {
  std::vector<CaptureFrame> frames;
  InstrumentSelection instruments = InstrumentSelection::of({Instrument::Keys});
  bool auto_mix = false;
  bool master = false;
  /// Render every playback block (underrun accounting) instead of only
  /// advancing the playhead.
  bool render_playback = false;
  std::size_t block_frames = 512;
  /// Extra simulated playback once every job has settled.
  double tail_seconds = 0.0;
};

struct ComposeResult {
  AudioBuffer audio;
  LatencyReport report;
  nlohmann::json header;
  std::vector<SessionEvent> events;
  nlohmann::json state;
  std::shared_ptr<const Program> program;
  std::uint64_t underruns = 0;
  double finished_at = 0.0;

  std::string log_jsonl() const;
  RecordedSession recorded() const { return {header_with_schema(), events}; }

 private:
  nlohmann::json header_with_schema() const;
};

/// Runs a whole session on a VirtualRuntime: captures are fed in order as
/// back-pressure allows, playback advances in blocks, and the export covers
/// the finished timeline.
ComposeResult compose(const AppConfig& config, const ComposeOptions& options);

/// Reads JPEG files as capture frames.
std::vector<CaptureFrame> load_frames(const std::vector<std::string>& paths);

}  // namespace framebeat
