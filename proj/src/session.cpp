#include "framebeat/session.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "framebeat/error.hpp"

namespace framebeat {

using nlohmann::json;

namespace {

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string random_id() {
  std::random_device rd;
  std::uint64_t v = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  return "session-" + hex64(v).substr(0, 12);
}

json family_json(const EnvelopeFamily& f) {
  json j{{"kind", f.kind() == EnvelopeKind::EqualPower ? "equal_power" : "power_law"}};
  if (f.kind() == EnvelopeKind::PowerLaw) j["alpha"] = f.alpha();
  return j;
}

EnvelopeFamily family_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "equal_power") return EnvelopeFamily::equal_power();
  if (kind == "power_law") return EnvelopeFamily::power_law(j.at("alpha").get<double>());
  throw Error(ErrorCode::InvalidEnvelope, "unknown envelope family " + kind);
}

std::string time_str(const Time& t) { return to_string(t); }

AudioBuffer wire(const AudioBuffer& audio) { return decode_wav(encode_wav(audio)); }

SessionBackends checked(SessionBackends b) {
  if (!b.caption || !b.generation || !b.mix) {
    throw Error(ErrorCode::ConfigError, "session needs caption, generation and mix backends");
  }
  return b;
}

}  // namespace

// ---------------------------------------------------------------------------
// Event log

json to_json(const SessionEvent& e) { return {{"seq", e.seq}, {"at", e.at}, {"kind", e.kind}, {"payload", e.payload}}; }

SessionEvent event_from_json(const json& j) {
  SessionEvent e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.at = j.at("at").get<double>();
  e.kind = j.at("kind").get<std::string>();
  e.payload = j.value("payload", json::object());
  return e;
}

std::uint64_t EventLog::append(std::string kind, double at, json payload) {
  std::uint64_t seq;
  {
    std::lock_guard lock(mutex_);
    seq = events_.size() + 1;
    events_.push_back({seq, at, std::move(kind), std::move(payload)});
  }
  cv_.notify_all();
  return seq;
}

std::vector<SessionEvent> EventLog::since(std::uint64_t after_seq) const {
  std::lock_guard lock(mutex_);
  if (after_seq >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(after_seq), events_.end()};
}

std::uint64_t EventLog::last_seq() const {
  std::lock_guard lock(mutex_);
  return events_.size();
}

bool EventLog::wait_for(std::uint64_t after_seq, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  return cv_.wait_for(lock, timeout, [&] { return events_.size() > after_seq; });
}

void EventLog::write_jsonl(std::ostream& out, const json& header_extra) const {
  json header = header_extra.is_object() ? header_extra : json::object();
  header["schema"] = kSchema;
  header["version"] = kVersion;
  out << header.dump() << "\n";
  for (const auto& e : all()) out << to_json(e).dump() << "\n";
}

void EventLog::save(const std::string& path, const json& header_extra) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_jsonl(out, header_extra);
}

RecordedSession RecordedSession::parse(std::istream& in) {
  RecordedSession rec;
  std::string line;
  int lineno = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json j = json::parse(line);
      if (rec.header.is_null()) {
        if (j.value("schema", "") != EventLog::kSchema) {
          throw Error(ErrorCode::ConfigError, "not a session log (schema)");
        }
        if (j.value("version", 0) < 1 || j.value("version", 0) > EventLog::kVersion) {
          throw Error(ErrorCode::ConfigError, "unsupported session log version");
        }
        rec.header = std::move(j);
        continue;
      }
      rec.events.push_back(event_from_json(j));
      if (rec.events.back().seq != rec.events.size()) {
        throw Error(ErrorCode::ConfigError, "session log has a gap at line " + std::to_string(lineno));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, "session log line " + std::to_string(lineno) + ": " + e.what());
  }
  if (rec.header.is_null()) throw Error(ErrorCode::ConfigError, "empty session log");
  return rec;
}

RecordedSession RecordedSession::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  return parse(in);
}

std::string to_string(CaptureState s) {
  switch (s) {
    case CaptureState::Captioning: return "captioning";
    case CaptureState::AwaitingLock: return "awaiting_lock";
    case CaptureState::Generating: return "generating";
    case CaptureState::Ready: return "ready";
    case CaptureState::Scheduled: return "scheduled";
    case CaptureState::Failed: return "failed";
  }
  return "failed";
}

// ---------------------------------------------------------------------------
// Latency report

StageStats StageStats::of(std::vector<double> samples) {
  StageStats s;
  s.samples = std::move(samples);
  if (s.samples.empty()) return s;
  s.min = *std::min_element(s.samples.begin(), s.samples.end());
  s.max = *std::max_element(s.samples.begin(), s.samples.end());
  double sum = 0.0;
  for (double v : s.samples) sum += v;
  s.mean = sum / static_cast<double>(s.samples.size());
  return s;
}

json StageStats::to_json(double bin_seconds) const {
  std::map<long long, int> bins;
  for (double v : samples) ++bins[static_cast<long long>(std::floor(v / bin_seconds))];
  json hist = json::array();
  for (const auto& [bin, count] : bins) {
    hist.push_back({{"from", static_cast<double>(bin) * bin_seconds},
                    {"to", static_cast<double>(bin + 1) * bin_seconds},
                    {"count", count}});
  }
  return {{"count", samples.size()}, {"min", min}, {"mean", mean}, {"max", max}, {"histogram", hist}};
}

json LatencyReport::to_json() const {
  return {{"sections", sections},
          {"clock", simulated_clock ? "simulated" : "wall"},
          {"stages",
           {{"caption", caption.to_json(0.5)},
            {"generation", generation.to_json(0.5)},
            {"schedule", schedule.to_json(0.5)},
            {"end_to_end", end_to_end.to_json(0.5)}}},
          {"cost",
           {{"caption", caption_cost},
            {"generation", generation_cost},
            {"preview_mix", mix_cost},
            {"master", master_cost},
            {"total", total_cost()}}}};
}

// ---------------------------------------------------------------------------
// Orchestrator

Orchestrator::Orchestrator(Runtime& runtime, SessionBackends backends, SessionConfig config)
    : runtime_(runtime),
      backends_(checked(std::move(backends))),
      config_(std::move(config)),
      engine_(EngineConfig{config_.look_ahead, 512}),
      mixer_(runtime, *backends_.mix, config_.mix),
      instruments_(config_.initial_instruments) {
  if (config_.session_id.empty()) config_.session_id = random_id();
  mixer_.on_ready([this](const MixJob& job) { on_mix_ready(job); });
  mixer_.on_failed([this](const MixJob& job) { on_mix_failed(job); });
}

Orchestrator::~Orchestrator() { stop_playback(); }

void Orchestrator::start() { active_ = true; }

void Orchestrator::stop() {
  active_ = false;
  stop_playback();
}

json Orchestrator::log_header() const {
  return {{"session_id", config_.session_id},
          {"config",
           {{"look_ahead", time_str(config_.look_ahead)},
            {"lambda", config_.lambda},
            {"transient_threshold", config_.selection.transient.threshold},
            {"transient_guard", config_.selection.transient.guard},
            {"alpha_grid", config_.selection.alpha_grid},
            {"ambient_power_law", config_.ambient_power_law},
            {"master_target_db", config_.master_target_db}}},
          {"backends",
           {{"caption", backends_.caption->name()},
            {"generation", backends_.generation->name()},
            {"mix", backends_.mix->name()}}},
          {"caption_template", backends_.templates.version},
          {"prompt_tables", backends_.tables.version}};
}

void Orchestrator::emit(const std::string& kind, json payload) { log_.append(kind, runtime_.now(), std::move(payload)); }

std::size_t Orchestrator::pending_captures() const {
  return static_cast<std::size_t>(std::count_if(captures_.begin(), captures_.end(), [](const CaptureRecord& r) {
    return r.state != CaptureState::Scheduled && r.state != CaptureState::Failed;
  }));
}

bool Orchestrator::idle() const { return pending_captures() == 0 && mixer_.active_jobs().empty(); }

CaptureHandle Orchestrator::handle_capture(CaptureFrame frame, const InstrumentSelection& sel) {
  if (!active_) throw Error(ErrorCode::SessionNotActive, "session is not running");
  if (sel.empty()) throw Error(ErrorCode::InstrumentCapViolation, "select 1 to 3 instruments");
  if (frame.image_bytes.empty() || frame.width <= 0 || frame.height <= 0) {
    throw Error(ErrorCode::InvalidFrame, "capture frame is empty");
  }
  if (pending_captures() >= config_.max_pending) {
    throw Error(ErrorCode::BackPressure, std::to_string(pending_captures()) + " captures already in flight");
  }
  CaptureRecord rec;
  rec.index = captures_.size();
  rec.instruments = sel;
  rec.captured_at = runtime_.now();
  frame.captured_at = rec.captured_at;
  rec.frame = std::move(frame);
  const CaptureHandle handle{rec.index, rec.frame.hash()};
  emit("capture", {{"capture_index", rec.index},
                   {"frame_hash", hex64(handle.frame_hash)},
                   {"width", rec.frame.width},
                   {"height", rec.frame.height},
                   {"bytes", rec.frame.image_bytes.size()},
                   {"instruments", sel.names()}});
  captures_.push_back(std::move(rec));

  auto outcome = std::make_shared<CaptionOutcome>();
  auto error = std::make_shared<std::exception_ptr>();
  auto processing = std::make_shared<double>(0.0);
  const std::size_t index = handle.capture_index;
  runtime_.run_async(
      [this, outcome, error, processing, frame = captures_.back().frame] {
        const auto t0 = std::chrono::steady_clock::now();
        double latency = 0.0;
        try {
          *outcome = caption(frame, *backends_.caption, backends_.templates, config_.caption);
          latency = outcome->latency_seconds;
        } catch (...) {
          *error = std::current_exception();
        }
        *processing = elapsed_since(t0);
        return latency;
      },
      [this, index, outcome, error, processing] {
        captures_[index].caption_processing = *processing;
        on_caption(index, outcome, *error);
      });
  return handle;
}

void Orchestrator::fail_capture(CaptureRecord& rec, const std::string& stage, const std::exception& e) {
  rec.state = CaptureState::Failed;
  rec.error = e.what();
  json payload{{"stage", stage}, {"capture_index", rec.index}, {"message", e.what()}};
  if (const auto* err = dynamic_cast<const Error*>(&e)) payload["code"] = std::string(to_string(err->code()));
  emit("error", payload);
}

void Orchestrator::on_caption(std::size_t index, std::shared_ptr<CaptionOutcome> outcome, std::exception_ptr error) {
  CaptureRecord& rec = captures_[index];
  rec.caption_calls = std::max(1, outcome->calls);
  if (error) {
    try {
      std::rethrow_exception(error);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::MalformedCaption) rec.caption_calls = 2;
      fail_capture(rec, "caption", e);
    } catch (const std::exception& e) {
      fail_capture(rec, "caption", e);
    }
    advance_pipeline();
    schedule_ready();
    return;
  }
  rec.caption = outcome->caption;
  rec.caption_ready_at = runtime_.now();
  rec.state = CaptureState::AwaitingLock;
  emit("caption_ready", {{"capture_index", index},
                         {"caption", to_json(*rec.caption)},
                         {"latency", outcome->latency_seconds},
                         {"calls", outcome->calls}});
  advance_pipeline();
}

std::size_t Orchestrator::sections_expected_before(std::size_t capture_index) const {
  std::size_t k = 0;
  for (std::size_t i = 0; i < capture_index; ++i) {
    if (captures_[i].state != CaptureState::Failed) ++k;
  }
  return k;
}

void Orchestrator::advance_pipeline() {
  const auto t0 = std::chrono::steady_clock::now();
  for (auto& rec : captures_) {
    if (rec.state == CaptureState::Failed || rec.state == CaptureState::Scheduled) continue;
    if (!clock_) {
      // The earliest surviving capture sets tempo and genre for the session.
      if (rec.state != CaptureState::AwaitingLock) break;
      const double bpm = std::clamp(rec.caption->bpm.value_or(config_.default_bpm), SessionClock::kMinBpm,
                                    SessionClock::kMaxBpm);
      clock_ = SessionClock::from_bpm(bpm);
      genre_ = rec.caption->genre.empty() ? config_.default_genre : rec.caption->genre;
      engine_.set_clock(*clock_);
      emit("control", {{"action", "lock"},
                       {"capture_index", rec.index},
                       {"bpm", clock_->bpm()},
                       {"bar", time_str(clock_->bar())},
                       {"genre", *genre_},
                       {"bpm_defaulted", !rec.caption->bpm.has_value()}});
    }
    if (rec.state == CaptureState::AwaitingLock) {
      rec.caption_processing += elapsed_since(t0);
      start_generation(rec);
    }
  }
}

void Orchestrator::start_generation(CaptureRecord& rec) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t k = sections_expected_before(rec.index);
  try {
    rec.prompt = build_prompt(*rec.caption, rec.instruments, k, LockedStyle{*genre_, clock_->bpm()}, backends_.tables);
  } catch (const std::exception& e) {
    fail_capture(rec, "prompt", e);
    return;
  }
  GenerationRequest req;
  req.prompt = rec.prompt->text;
  req.bpm_hint = clock_->bpm();
  rec.state = CaptureState::Generating;
  rec.generation_started_at = runtime_.now();
  rec.caption_processing += elapsed_since(t0);

  auto result = std::make_shared<GenerationResult>();
  auto error = std::make_shared<std::exception_ptr>();
  auto processing = std::make_shared<double>(0.0);
  const std::size_t index = rec.index;
  runtime_.run_async(
      [this, req, result, error, processing] {
        const auto started = std::chrono::steady_clock::now();
        double latency = 0.0;
        try {
          *result = generate(req, *backends_.generation, config_.generation);
          latency = result->backend_latency;
        } catch (...) {
          *error = std::current_exception();
        }
        *processing = elapsed_since(started);
        return latency;
      },
      [this, index, result, error, processing] {
        captures_[index].generation_processing = *processing;
        on_generation(index, result, *error);
      });
}

void Orchestrator::on_generation(std::size_t index, std::shared_ptr<GenerationResult> result,
                                 std::exception_ptr error) {
  CaptureRecord& rec = captures_[index];
  if (error) {
    try {
      std::rethrow_exception(error);
    } catch (const Error& e) {
      const bool transient = e.code() == ErrorCode::BackendUnavailable || e.code() == ErrorCode::Timeout;
      rec.generation_attempts = transient ? config_.generation.retries + 1 : 1;
      fail_capture(rec, "generation", e);
    } catch (const std::exception& e) {
      rec.generation_attempts = 1;
      fail_capture(rec, "generation", e);
    }
    schedule_ready();
    return;
  }
  rec.generation_attempts = result->attempts;
  rec.generation = std::move(*result);
  rec.generation_ready_at = runtime_.now();
  rec.state = CaptureState::Ready;
  emit("generation_ready", {{"capture_index", index},
                            {"attempts", rec.generation->attempts},
                            {"latency", rec.generation->backend_latency},
                            {"frames", rec.generation->audio.frames()},
                            {"fingerprint", hex64(fingerprint(rec.generation->audio))}});
  schedule_ready();
}

void Orchestrator::schedule_ready() {
  for (auto& rec : captures_) {
    if (rec.state == CaptureState::Failed || rec.state == CaptureState::Scheduled) continue;
    if (rec.state != CaptureState::Ready) break;
    schedule(rec);
  }
}

void Orchestrator::schedule(CaptureRecord& rec) {
  const auto t0 = std::chrono::steady_clock::now();
  const SessionClock& clock = *clock_;
  ScheduledSection s;
  SpliceCost cost;
  try {
    const AudioBuffer& clip = rec.generation->audio;
    const int bars = fit_bars(from_samples(static_cast<std::int64_t>(clip.frames())), clock);
    auto buffer = std::make_shared<const AudioBuffer>(
        clip.head(static_cast<std::size_t>(to_samples(Time(bars) * clock.bar()))));
    const Time cf = crossfade_window(clock);
    const auto window = static_cast<std::size_t>(to_samples(cf));
    // The first section's splice is its own loop point.
    const AudioBuffer& outgoing = sections_.empty() ? *buffer : *sections_.back().buffer;
    const SpliceContext ctx =
        make_splice_context(outgoing, *buffer, window, rec.caption->section_role, config_.lambda);

    EnvelopeFamily family = EnvelopeFamily::equal_power();
    bool forced = false;
    if (config_.ambient_power_law) {
      std::vector<std::string> tags = rec.caption->mood;
      tags.push_back(*genre_);
      for (const auto& tag : tags) {
        for (const auto& kw : config_.ambient_keywords) {
          if (lower(tag).find(lower(kw)) != std::string::npos) forced = true;
        }
      }
    }
    if (forced) {
      family = EnvelopeFamily::power_law(EnvelopeFamily::kDefaultAlpha);
      cost = evaluate_splice(family, ctx, outgoing, *buffer, window, config_.selection.transient);
    } else {
      const EnvelopeChoice choice = select_envelope(ctx, outgoing, *buffer, window, config_.selection);
      family = choice.family;
      cost = choice.cost;
    }

    SectionDraft draft;
    draft.capture_index = rec.index;
    draft.bar_count = bars;
    draft.buffer = buffer;
    draft.role = rec.caption->section_role;
    draft.crossfade = CrossfadePlan{family, window, to_seconds(cf)};
    draft.prompt = rec.prompt->text;
    s = engine_.append_section(draft);
  } catch (const std::exception& e) {
    fail_capture(rec, "schedule", e);
    return;
  }
  sections_.push_back(s);
  rec.section_index = s.index;
  rec.state = CaptureState::Scheduled;
  rec.scheduled_at = runtime_.now();
  rec.schedule_processing = elapsed_since(t0);

  json plan = family_json(s.crossfade.family);
  plan["window_samples"] = s.crossfade.window_len_samples;
  plan["window_seconds"] = s.crossfade.window_len_seconds;
  emit("section_scheduled", {{"index", s.index},
                             {"capture_index", s.capture_index},
                             {"role", to_string(s.role)},
                             {"bar_count", s.bar_count},
                             {"length", time_str(s.length)},
                             {"length_seconds", s.length_seconds()},
                             {"start", time_str(s.start_time)},
                             {"start_seconds", s.start_seconds()},
                             {"downbeat", time_str(s.downbeat)},
                             {"downbeat_seconds", to_seconds(s.downbeat)},
                             {"crossfade", plan},
                             {"cost",
                              {{"loudness_mismatch", cost.loudness_mismatch},
                               {"transient", cost.transient_cost},
                               {"total", cost.total}}},
                             {"prompt", s.prompt},
                             {"bpm", clock.bpm()},
                             {"bpm_hint", rec.generation->request.bpm_hint},
                             {"genre", *genre_},
                             {"frames", s.buffer->frames()},
                             {"fingerprint", hex64(fingerprint(*s.buffer))}});
  maybe_auto_mix();
  if (master_requested_) {
    try {
      submit_master();
    } catch (const Error&) {
      // already logged; the unmastered timeline keeps playing
    }
  }
}

void Orchestrator::maybe_auto_mix() {
  if (config_.auto_mix && sections_.size() >= 2) submit_preview();
}

void Orchestrator::submit_preview() {
  std::vector<Stem> stems;
  for (const auto& s : sections_) {
    Stem stem;
    stem.section_index = s.index;
    stem.audio = s.buffer;
    stem.metadata = StemMetadata::full_section(*genre_);
    stems.push_back(std::move(stem));
  }
  try {
    const MixJob& job = mixer_.submit_preview_mix(std::move(stems), *genre_);
    emit("mix_submitted", job_summary(job));
  } catch (const Error& e) {
    emit("error", {{"stage", "mix"}, {"code", std::string(to_string(e.code()))}, {"message", e.what()}});
  }
}

void Orchestrator::submit_master() {
  try {
    const std::size_t placements = engine_.placement_count();
    auto arrangement = std::make_shared<const AudioBuffer>(engine_.render_arrangement(placements));
    MasterSettings settings;
    settings.musical_style = *genre_;
    settings.target_rms_db = config_.master_target_db;
    const MixJob& job = mixer_.submit_master(std::move(arrangement), sections_.size(), placements, settings);
    emit("mix_submitted", job_summary(job));
  } catch (const Error& e) {
    emit("error", {{"stage", "master"}, {"code", std::string(to_string(e.code()))}, {"message", e.what()}});
    throw;
  }
}

void Orchestrator::set_auto_mix(bool enabled) {
  const bool was = config_.auto_mix;
  config_.auto_mix = enabled;
  emit("control", {{"action", "auto_mix"}, {"enabled", enabled}});
  if (enabled && !was) maybe_auto_mix();
}

void Orchestrator::select_instruments(const InstrumentSelection& sel) {
  if (sel.empty()) throw Error(ErrorCode::InstrumentCapViolation, "select 1 to 3 instruments");
  instruments_ = sel;
  emit("control", {{"action", "select_instruments"}, {"instruments", sel.names()}});
}

bool Orchestrator::toggle_instrument(Instrument instrument) {
  std::vector<Instrument> next = instruments_.instruments();
  auto it = std::find(next.begin(), next.end(), instrument);
  if (it != next.end()) {
    next.erase(it);
  } else {
    next.push_back(instrument);
  }
  if (next.empty() || next.size() > 3) return false;
  select_instruments(InstrumentSelection::of(next));
  return true;
}

const MixJob& Orchestrator::request_master() {
  if (!active_) throw Error(ErrorCode::SessionNotActive, "session is not running");
  if (sections_.empty()) throw Error(ErrorCode::InvalidState, "nothing to master yet");
  master_requested_ = true;
  emit("control", {{"action", "master"}});
  submit_master();
  const MixJob* latest = nullptr;
  for (const MixJob* j : mixer_.jobs()) {
    if (j->kind == MixKind::Master) latest = j;
  }
  return *latest;
}

AudioBuffer Orchestrator::export_render() const {
  if (sections_.empty()) throw Error(ErrorCode::InvalidState, "nothing to export yet");
  return engine_.render_session();
}

void Orchestrator::on_mix_ready(const MixJob& job) {
  if (!active_ || !job.result) return;
  HotSwapRequest req;
  req.replacement = job.result;
  req.earliest_time = engine_.playhead_time();
  req.reason = job.kind == MixKind::Master ? SwapReason::Mastered : SwapReason::PreviewMix;
  req.covers_sections = job.covers_sections;
  try {
    const SwapTicket ticket = engine_.request_hot_swap(req);
    swap_jobs_[ticket.id] = job.id;
    emit("swap_scheduled", {{"ticket", ticket.id},
                            {"boundary", time_str(ticket.boundary)},
                            {"boundary_seconds", to_seconds(ticket.boundary)},
                            {"reason", to_string(req.reason)},
                            {"covers_sections", req.covers_sections},
                            {"job_id", job.id},
                            {"task_id", job.task_id},
                            {"playhead", engine_.playhead()},
                            {"fingerprint", hex64(fingerprint(*job.result))}});
  } catch (const Error& e) {
    emit("error", {{"stage", "swap"}, {"code", std::string(to_string(e.code()))}, {"message", e.what()}});
  }
}

void Orchestrator::on_mix_failed(const MixJob& job) {
  emit("error", {{"stage", to_string(job.kind)},
                 {"code", std::string(to_string(ErrorCode::JobFailed))},
                 {"job_id", job.id},
                 {"task_id", job.task_id},
                 {"message", job.failure_reason}});
}

void Orchestrator::tick() {
  for (const SwapCommit& c : engine_.poll_commits()) {
    json payload{{"ticket", c.ticket.id},
                 {"boundary", time_str(c.ticket.boundary)},
                 {"boundary_seconds", to_seconds(c.ticket.boundary)},
                 {"reason", to_string(c.reason)},
                 {"covers_sections", c.covers_sections},
                 {"fingerprint", hex64(c.replacement_fingerprint)},
                 {"playhead", engine_.playhead()}};
    if (auto it = swap_jobs_.find(c.ticket.id); it != swap_jobs_.end()) payload["job_id"] = it->second;
    emit("swap_committed", payload);
  }
}

void Orchestrator::start_playback(bool render_audio, std::size_t block_frames) {
  stop_playback();
  playback_alive_ = std::make_shared<bool>(true);
  playback_step(playback_alive_, render_audio, block_frames, runtime_.now(), 0);
}

void Orchestrator::stop_playback() {
  if (playback_alive_) *playback_alive_ = false;
  playback_alive_.reset();
}

void Orchestrator::playback_step(std::shared_ptr<bool> alive, bool render_audio, std::size_t block_frames,
                                 double origin, std::uint64_t n) {
  if (!*alive) return;
  if (render_audio) {
    std::vector<float> l(block_frames);
    std::vector<float> r(block_frames);
    engine_.render(l, r);
  } else {
    engine_.advance(static_cast<std::int64_t>(block_frames));
  }
  tick();
  const double next = origin + static_cast<double>((n + 1) * block_frames) / kSampleRate;
  runtime_.post_at(next, [this, alive, render_audio, block_frames, origin, n] {
    playback_step(alive, render_audio, block_frames, origin, n + 1);
  });
}

DisplayState Orchestrator::display_state(int audio_level) const {
  DisplayState d;
  if (clock_) d.bpm = static_cast<int>(std::lround(clock_->bpm()));
  if (!sections_.empty()) d.section_role = sections_.back().role;
  d.audio_level = std::clamp(audio_level, 0, 15);
  for (Instrument i : instruments_.instruments()) d.led_mask |= static_cast<std::uint8_t>(1u << static_cast<int>(i));
  if (pending_captures() > 0) d.led_mask |= static_cast<std::uint8_t>(1u << static_cast<int>(Button::Capture));
  d.genre = genre_.value_or("").substr(0, DisplayState::kGenreWidth);
  return d;
}

json Orchestrator::snapshot(int audio_level) const {
  json sections = json::array();
  for (const auto& s : sections_) {
    sections.push_back({{"index", s.index},
                        {"capture_index", s.capture_index},
                        {"role", to_string(s.role)},
                        {"bar_count", s.bar_count},
                        {"start", time_str(s.start_time)},
                        {"start_seconds", s.start_seconds()},
                        {"downbeat", time_str(s.downbeat)},
                        {"downbeat_seconds", to_seconds(s.downbeat)},
                        {"length_seconds", s.length_seconds()},
                        {"crossfade", s.crossfade.family.describe()},
                        {"prompt", s.prompt}});
  }
  json pending = json::array();
  for (const auto& c : captures_) {
    if (c.state == CaptureState::Scheduled) continue;
    json p{{"capture_index", c.index}, {"state", to_string(c.state)}};
    if (!c.error.empty()) p["error"] = c.error;
    pending.push_back(p);
  }
  json jobs = json::array();
  for (const MixJob* j : mixer_.jobs()) jobs.push_back(job_summary(*j));
  const DisplayState d = display_state(audio_level);
  const auto program = engine_.snapshot();
  json session{{"id", config_.session_id},
               {"active", active_},
               {"auto_mix", config_.auto_mix},
               {"instruments", instruments_.names()}};
  session["bpm"] = clock_ ? json(clock_->bpm()) : json(nullptr);
  session["bar_seconds"] = clock_ ? json(clock_->bar_seconds()) : json(nullptr);
  session["genre"] = genre_ ? json(*genre_) : json(nullptr);
  return {{"session", session},
          {"sections", sections},
          {"captures", pending},
          {"jobs", jobs},
          {"display",
           {{"bpm", d.bpm},
            {"role", to_string(d.section_role)},
            {"level", d.audio_level},
            {"leds", d.led_mask},
            {"genre", d.genre},
            {"line", encode_display(d)}}},
          {"playhead", engine_.playhead()},
          {"playhead_seconds", to_seconds(engine_.playhead_time())},
          {"end_seconds", static_cast<double>(program->end_sample()) / kSampleRate},
          {"last_seq", log_.last_seq()}};
}

LatencyReport Orchestrator::latency_report() const {
  LatencyReport r;
  r.simulated_clock = runtime_.simulated();
  std::vector<double> cap, gen, sched, total;
  for (const auto& c : captures_) {
    r.caption_cost += config_.caption_cost * c.caption_calls;
    r.generation_cost += config_.generation.cost_per_call * c.generation_attempts;
    if (c.state != CaptureState::Scheduled) continue;
    const double extra_cap = r.simulated_clock ? c.caption_processing : 0.0;
    const double extra_gen = r.simulated_clock ? c.generation_processing : 0.0;
    const double extra_sched = r.simulated_clock ? c.schedule_processing : 0.0;
    cap.push_back(*c.caption_ready_at - c.captured_at + extra_cap);
    gen.push_back(*c.generation_ready_at - *c.caption_ready_at + extra_gen);
    sched.push_back(*c.scheduled_at - *c.generation_ready_at + extra_sched);
    total.push_back(cap.back() + gen.back() + sched.back());
  }
  for (const MixJob* j : mixer_.jobs()) {
    (j->kind == MixKind::Master ? r.master_cost : r.mix_cost) += j->cost_units;
  }
  r.sections = total.size();
  r.caption = StageStats::of(cap);
  r.generation = StageStats::of(gen);
  r.schedule = StageStats::of(sched);
  r.end_to_end = StageStats::of(total);
  return r;
}

// ---------------------------------------------------------------------------
// Replay

AudioBuffer replay_render(const RecordedSession& session) {
  const json& header = session.header;
  const json backends = header.value("backends", json::object());
  if (backends.value("generation", "mock") != "mock" || backends.value("mix", "mock") != "mock") {
    throw Error(ErrorCode::InvalidState, "replay needs a session recorded with the mock generation and mix backends");
  }
  EngineConfig cfg;
  const json config = header.value("config", json::object());
  if (config.contains("look_ahead")) cfg.look_ahead = parse_time(config.at("look_ahead").get<std::string>());
  LoopEngine engine(cfg);
  MockGenerationBackend generator;
  std::map<std::uint64_t, json> jobs;
  std::vector<std::shared_ptr<const AudioBuffer>> sections;

  auto diverged = [](const std::string& what, std::uint64_t seq) {
    return Error(ErrorCode::InvalidState, "replay diverged at event " + std::to_string(seq) + ": " + what);
  };

  for (const auto& e : session.events) {
    const json& p = e.payload;
    if (e.kind == "section_scheduled") {
      if (!engine.clock()) engine.set_clock(SessionClock::from_bpm(p.at("bpm").get<double>()));
      const SessionClock clock = *engine.clock();
      GenerationRequest req;
      req.prompt = p.at("prompt").get<std::string>();
      req.bpm_hint = p.at("bpm_hint").get<double>();
      const GenerationResult clip = generate(req, generator);
      const int bars = p.at("bar_count").get<int>();
      auto buffer = std::make_shared<const AudioBuffer>(
          clip.audio.head(static_cast<std::size_t>(to_samples(Time(bars) * clock.bar()))));
      if (hex64(fingerprint(*buffer)) != p.at("fingerprint").get<std::string>()) {
        throw diverged("section " + std::to_string(p.at("index").get<std::size_t>()) + " audio", e.seq);
      }
      const json& plan = p.at("crossfade");
      SectionDraft draft;
      draft.capture_index = p.at("capture_index").get<std::size_t>();
      draft.bar_count = bars;
      draft.buffer = buffer;
      parse_section_role(p.at("role").get<std::string>(), draft.role);
      draft.crossfade = CrossfadePlan{family_from_json(plan), plan.at("window_samples").get<std::size_t>(),
                                      plan.at("window_seconds").get<double>()};
      draft.prompt = req.prompt;
      engine.append_section(draft, parse_time(p.at("start").get<std::string>()));
      sections.push_back(buffer);
    } else if (e.kind == "mix_submitted") {
      jobs[p.at("id").get<std::uint64_t>()] = p;
    } else if (e.kind == "swap_scheduled") {
      const json& job = jobs.at(p.at("job_id").get<std::uint64_t>());
      MixKind kind;
      parse_mix_kind(job.at("kind").get<std::string>(), kind);
      AudioBuffer replacement;
      if (kind == MixKind::PreviewMix) {
        std::vector<AudioBuffer> uploaded;
        std::vector<StemMetadata> meta;
        for (const auto& stem : job.at("stems")) {
          uploaded.push_back(wire(*sections.at(stem.at("section_index").get<std::size_t>())));
          meta.push_back(stem_metadata_from_json(stem.at("metadata")));
        }
        std::vector<std::pair<const AudioBuffer*, StemMetadata>> inputs;
        for (std::size_t i = 0; i < uploaded.size(); ++i) inputs.emplace_back(&uploaded[i], meta[i]);
        replacement = wire(mock_mix(inputs));
      } else {
        const AudioBuffer input = wire(engine.render_arrangement(job.at("placement_count").get<std::size_t>()));
        replacement = wire(mock_master(input, job.value("target_rms_db", -14.0)));
      }
      if (hex64(fingerprint(replacement)) != p.at("fingerprint").get<std::string>()) {
        throw diverged("mix job " + job.at("task_id").get<std::string>() + " result", e.seq);
      }
      const std::int64_t playhead = p.at("playhead").get<std::int64_t>();
      if (playhead > engine.playhead()) engine.advance(playhead - engine.playhead());
      SwapReason reason;
      parse_swap_reason(p.at("reason").get<std::string>(), reason);
      HotSwapRequest req;
      req.replacement = std::make_shared<const AudioBuffer>(std::move(replacement));
      req.reason = reason;
      req.covers_sections = p.at("covers_sections").get<std::size_t>();
      req.earliest_time = from_samples(playhead);
      engine.schedule_hot_swap_at(req, parse_time(p.at("boundary").get<std::string>()));
    }
  }
  if (sections.empty()) throw Error(ErrorCode::InvalidState, "session log has no sections");
  return engine.render_session();
}

}  // namespace framebeat
