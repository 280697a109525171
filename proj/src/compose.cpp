#include "framebeat/compose.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "framebeat/error.hpp"

namespace framebeat {

using nlohmann::json;

json ComposeResult::header_with_schema() const {
  json h = header;
  h["schema"] = EventLog::kSchema;
  h["version"] = EventLog::kVersion;
  return h;
}

std::string ComposeResult::log_jsonl() const {
  std::ostringstream out;
  out << header_with_schema().dump() << "\n";
  for (const auto& e : events) out << to_json(e).dump() << "\n";
  return out.str();
}

std::vector<CaptureFrame> load_frames(const std::vector<std::string>& paths) {
  std::vector<CaptureFrame> frames;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    frames.push_back(CaptureFrame::from_jpeg(std::move(bytes)));
  }
  return frames;
}

ComposeResult compose(const AppConfig& config, const ComposeOptions& options) {
  if (options.frames.empty()) throw Error(ErrorCode::TooFewSections, "compose needs at least one image");
  VirtualRuntime rt;
  BackendSet backends = BackendSet::build(config, rt);
  SessionConfig sc = config.session_config();
  sc.auto_mix = sc.auto_mix || options.auto_mix;
  sc.initial_instruments = options.instruments;
  Orchestrator orch(rt, backends.view(), sc);
  orch.start();
  orch.start_playback(options.render_playback, options.block_frames);

  for (const auto& frame : options.frames) {
    while (orch.pending_captures() >= sc.max_pending) rt.step();
    orch.handle_capture(frame);
  }
  while (orch.pending_captures() > 0) rt.step();
  if (options.master && !orch.engine().sections().empty()) orch.request_master();
  while (!orch.mixer().active_jobs().empty()) rt.step();
  // Let the last scheduled swap reach its boundary.
  const double settle = orch.clock() ? orch.clock()->bar_seconds() + to_seconds(sc.look_ahead) + 0.1 : 0.0;
  rt.run_until(rt.now() + settle + options.tail_seconds);
  orch.stop_playback();

  ComposeResult result;
  result.audio = orch.export_render();
  result.report = orch.latency_report();
  result.header = orch.log_header();
  result.events = orch.events().all();
  result.state = orch.snapshot();
  result.program = orch.engine().snapshot();
  result.underruns = orch.underruns();
  result.finished_at = rt.now();
  orch.stop();
  return result;
}

}  // namespace framebeat
