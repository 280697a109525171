#include "framebeat/mixing.hpp"

#include <algorithm>
#include <cmath>

#include "framebeat/error.hpp"

namespace framebeat {

using nlohmann::json;

std::string to_string(InstrumentGroup v) {
  switch (v) {
    case InstrumentGroup::Keys: return "keys";
    case InstrumentGroup::Guitar: return "guitar";
    case InstrumentGroup::Bass: return "bass";
    case InstrumentGroup::Percussion: return "percussion";
    case InstrumentGroup::FullSection: return "full_section";
  }
  return "full_section";
}

std::string to_string(Presence v) {
  switch (v) {
    case Presence::Lead: return "lead";
    case Presence::Normal: return "normal";
    case Presence::Background: return "background";
  }
  return "normal";
}

std::string to_string(Pan v) {
  switch (v) {
    case Pan::Left: return "left";
    case Pan::Center: return "center";
    case Pan::Right: return "right";
  }
  return "center";
}

std::string to_string(Reverb v) {
  switch (v) {
    case Reverb::Dry: return "dry";
    case Reverb::Room: return "room";
    case Reverb::Hall: return "hall";
  }
  return "room";
}

std::string to_string(MixKind v) { return v == MixKind::PreviewMix ? "preview_mix" : "master"; }

bool parse_mix_kind(std::string_view text, MixKind& out) {
  if (text == "preview_mix") out = MixKind::PreviewMix;
  else if (text == "master") out = MixKind::Master;
  else return false;
  return true;
}

std::string to_string(JobStatus v) {
  switch (v) {
    case JobStatus::Pending: return "pending";
    case JobStatus::Uploading: return "uploading";
    case JobStatus::Processing: return "processing";
    case JobStatus::Ready: return "ready";
    case JobStatus::Failed: return "failed";
  }
  return "pending";
}

namespace {

template <typename E, std::size_t N>
E enum_from(const std::string& text, const E (&values)[N]) {
  for (E v : values) {
    if (to_string(v) == text) return v;
  }
  throw Error(ErrorCode::ConfigError, "unknown stem setting '" + text + "'");
}

}  // namespace

StemMetadata StemMetadata::full_section(const std::string& genre) {
  StemMetadata m;
  m.musical_style = genre;
  return m;
}

json to_json(const StemMetadata& m) {
  return {{"instrument_group", to_string(m.instrument_group)},
          {"presence_setting", to_string(m.presence_setting)},
          {"pan_preference", to_string(m.pan_preference)},
          {"reverb_preference", to_string(m.reverb_preference)},
          {"musical_style", m.musical_style}};
}

StemMetadata stem_metadata_from_json(const json& j) {
  static const InstrumentGroup groups[] = {InstrumentGroup::Keys, InstrumentGroup::Guitar, InstrumentGroup::Bass,
                                           InstrumentGroup::Percussion, InstrumentGroup::FullSection};
  static const Presence presences[] = {Presence::Lead, Presence::Normal, Presence::Background};
  static const Pan pans[] = {Pan::Left, Pan::Center, Pan::Right};
  static const Reverb reverbs[] = {Reverb::Dry, Reverb::Room, Reverb::Hall};
  StemMetadata m;
  m.instrument_group = enum_from(j.value("instrument_group", "full_section"), groups);
  m.presence_setting = enum_from(j.value("presence_setting", "normal"), presences);
  m.pan_preference = enum_from(j.value("pan_preference", "center"), pans);
  m.reverb_preference = enum_from(j.value("reverb_preference", "room"), reverbs);
  m.musical_style = j.value("musical_style", "");
  return m;
}

void MixJob::transition(JobStatus next) {
  bool ok = false;
  switch (status) {
    case JobStatus::Pending: ok = next == JobStatus::Uploading; break;
    case JobStatus::Uploading: ok = next == JobStatus::Processing || next == JobStatus::Failed; break;
    case JobStatus::Processing: ok = next == JobStatus::Ready || next == JobStatus::Failed; break;
    case JobStatus::Ready:
    case JobStatus::Failed: ok = false; break;
  }
  if (!ok) {
    throw Error(ErrorCode::InvalidTransition, "mix job " + std::to_string(id) + ": " + to_string(status) + " -> " +
                                                  to_string(next));
  }
  status = next;
}

json job_summary(const MixJob& job) {
  json stems = json::array();
  for (const auto& s : job.stems) {
    stems.push_back({{"section_index", s.section_index}, {"remote_id", s.remote_id}, {"metadata", to_json(s.metadata)}});
  }
  json j{{"id", job.id},
         {"task_id", job.task_id},
         {"kind", to_string(job.kind)},
         {"status", to_string(job.status)},
         {"submitted_at", job.submitted_at},
         {"superseded", job.superseded},
         {"covers_sections", job.covers_sections},
         {"placement_count", job.placement_count},
         {"stems", stems},
         {"cost", job.cost_units}};
  j["completed_at"] = job.completed_at ? json(*job.completed_at) : json(nullptr);
  if (job.master) j["target_rms_db"] = job.master->target_rms_db;
  if (!job.failure_reason.empty()) j["failure_reason"] = job.failure_reason;
  if (job.result) j["result_fingerprint"] = hex64(fingerprint(*job.result));
  return j;
}

AudioBuffer mock_mix(const std::vector<std::pair<const AudioBuffer*, StemMetadata>>& stems) {
  std::size_t frames = 0;
  for (const auto& [audio, meta] : stems) frames = std::max(frames, audio->frames());
  std::vector<double> l(frames, 0.0);
  std::vector<double> r(frames, 0.0);
  const double headroom = db_to_amplitude(-3.0);
  for (const auto& [audio, meta] : stems) {
    double presence = 1.0;
    if (meta.presence_setting == Presence::Lead) presence = db_to_amplitude(2.0);
    if (meta.presence_setting == Presence::Background) presence = db_to_amplitude(-6.0);
    const double gl = meta.pan_preference == Pan::Right ? 0.5 : 1.0;
    const double gr = meta.pan_preference == Pan::Left ? 0.5 : 1.0;
    for (std::size_t n = 0; n < audio->frames(); ++n) {
      l[n] += headroom * presence * gl * audio->at(0, n);
      r[n] += headroom * presence * gr * audio->at(1, n);
    }
  }
  AudioBuffer out(frames);
  for (std::size_t n = 0; n < frames; ++n) {
    out.at(0, n) = static_cast<float>(std::clamp(l[n], -1.0, 1.0));
    out.at(1, n) = static_cast<float>(std::clamp(r[n], -1.0, 1.0));
  }
  return out;
}

AudioBuffer mock_master(const AudioBuffer& input, double target_rms_db) {
  const double target = db_to_amplitude(target_rms_db);
  AudioBuffer out = input;
  if (input.empty() || rms_power(input).silent()) return out;
  // Clipping eats some of the gain, so refine it against the clamped output.
  double gain = target / rms_power(input).rms;
  for (int iteration = 0; iteration < 6; ++iteration) {
    for (int c = 0; c < kChannels; ++c) {
      for (std::size_t n = 0; n < input.frames(); ++n) {
        out.at(c, n) = static_cast<float>(std::clamp(gain * input.at(c, n), -1.0, 1.0));
      }
    }
    const double rms = rms_power(out).rms;
    if (rms <= 0.0 || std::abs(amplitude_to_db(rms) - target_rms_db) < 1e-3) break;
    gain *= target / rms;
  }
  return out;
}

double poll_delay(std::size_t attempt, double base, double cap) {
  return std::min(cap, base * std::pow(2.0, static_cast<double>(std::min<std::size_t>(attempt, 60))));
}

MockMixBackend::MockMixBackend(Runtime& runtime, Config config) : runtime_(runtime), config_(config) {}

std::string MockMixBackend::upload_stem(const AudioBuffer& audio, const StemMetadata& metadata) {
  if (fail_upload_) {
    fail_upload_ = false;
    throw Error(ErrorCode::UploadFailed, "mock mix backend: injected upload failure");
  }
  const std::string id = "stem-" + std::to_string(next_id_++);
  // Stems travel as 16-bit WAV, exactly like a real upload.
  stems_.emplace(id, std::make_pair(decode_wav(encode_wav(audio)), metadata));
  return id;
}

std::string MockMixBackend::add_task(AudioBuffer result, double latency) {
  const std::string id = "task-" + std::to_string(next_id_++);
  Task task;
  task.ready_at = runtime_.now() + latency;
  task.result = std::move(result);
  if (fail_job_) {
    task.failure = *fail_job_;
    fail_job_.reset();
  }
  tasks_.emplace(id, std::move(task));
  if (config_.webhook && webhook_) {
    runtime_.post_at(runtime_.now() + latency, [this, id] {
      if (webhook_) webhook_(id);
    });
  }
  return id;
}

std::string MockMixBackend::create_preview(const std::vector<std::string>& stem_ids, const std::string&) {
  std::vector<std::pair<const AudioBuffer*, StemMetadata>> inputs;
  for (const auto& id : stem_ids) {
    auto it = stems_.find(id);
    if (it == stems_.end()) throw Error(ErrorCode::JobFailed, "unknown stem " + id);
    inputs.emplace_back(&it->second.first, it->second.second);
  }
  return add_task(mock_mix(inputs), config_.preview_latency);
}

std::string MockMixBackend::create_master(const std::string& stem_id, const MasterSettings& settings) {
  auto it = stems_.find(stem_id);
  if (it == stems_.end()) throw Error(ErrorCode::JobFailed, "unknown stem " + stem_id);
  return add_task(mock_master(it->second.first, settings.target_rms_db), config_.master_latency);
}

RemoteStatus MockMixBackend::status(const std::string& task_id) {
  ++status_calls_;
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) return {RemoteStatus::State::Failed, "unknown task " + task_id};
  if (runtime_.now() < it->second.ready_at) return {};
  if (it->second.failure) return {RemoteStatus::State::Failed, *it->second.failure};
  return {RemoteStatus::State::Ready, {}};
}

AudioBuffer MockMixBackend::download(const std::string& task_id) {
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) throw Error(ErrorCode::JobFailed, "unknown task " + task_id);
  return decode_wav(encode_wav(it->second.result));
}

MixClient::MixClient(Runtime& runtime, MixBackend& backend, MixClientConfig config)
    : runtime_(runtime), backend_(backend), config_(config) {
  backend_.set_webhook([this](const std::string& task_id) { receive_webhook(task_id); });
}

MixJob& MixClient::create(MixKind kind) {
  for (auto& [id, job] : jobs_) {
    if (job.kind == kind && job.active()) job.superseded = true;
  }
  MixJob job;
  job.id = next_id_++;
  job.kind = kind;
  job.submitted_at = runtime_.now();
  return jobs_.emplace(job.id, std::move(job)).first->second;
}

const MixJob& MixClient::submit_preview_mix(std::vector<Stem> stems, const std::string& style) {
  if (stems.size() < 2) {
    throw Error(ErrorCode::TooFewSections, "a preview mix needs at least two sections, got " +
                                               std::to_string(stems.size()));
  }
  MixJob& job = create(MixKind::PreviewMix);
  job.stems = std::move(stems);
  job.covers_sections = job.stems.size();
  job.transition(JobStatus::Uploading);
  try {
    std::vector<std::string> ids;
    for (auto& s : job.stems) {
      s.remote_id = backend_.upload_stem(*s.audio, s.metadata);
      ids.push_back(s.remote_id);
    }
    job.task_id = backend_.create_preview(ids, style);
  } catch (const Error& e) {
    job.failure_reason = e.what();
    job.transition(JobStatus::Failed);
    job.completed_at = runtime_.now();
    throw Error(ErrorCode::UploadFailed, e.what());
  }
  job.cost_units = config_.cost_per_preview_stem * static_cast<double>(job.stems.size());
  job.transition(JobStatus::Processing);
  if (!backend_.pushes_webhooks()) schedule_poll(job.id, 0);
  return job;
}

const MixJob& MixClient::submit_master(std::shared_ptr<const AudioBuffer> arrangement, std::size_t covers_sections,
                                       std::size_t placement_count, const MasterSettings& settings) {
  if (covers_sections == 0 || !arrangement || arrangement->empty()) {
    throw Error(ErrorCode::TooFewSections, "nothing to master");
  }
  MixJob& job = create(MixKind::Master);
  job.covers_sections = covers_sections;
  job.placement_count = placement_count;
  job.master = settings;
  Stem stem;
  stem.section_index = 0;
  stem.audio = std::move(arrangement);
  stem.metadata = StemMetadata::full_section(settings.musical_style);
  job.stems.push_back(stem);
  job.transition(JobStatus::Uploading);
  try {
    job.stems[0].remote_id = backend_.upload_stem(*job.stems[0].audio, job.stems[0].metadata);
    job.task_id = backend_.create_master(job.stems[0].remote_id, settings);
  } catch (const Error& e) {
    job.failure_reason = e.what();
    job.transition(JobStatus::Failed);
    job.completed_at = runtime_.now();
    throw Error(ErrorCode::UploadFailed, e.what());
  }
  job.cost_units = config_.cost_per_master;
  job.transition(JobStatus::Processing);
  if (!backend_.pushes_webhooks()) schedule_poll(job.id, 0);
  return job;
}

void MixClient::schedule_poll(std::uint64_t id, std::size_t attempt) {
  runtime_.post_after(poll_delay(attempt, config_.poll_base, config_.poll_cap), [this, id, attempt] {
    auto it = jobs_.find(id);
    if (it == jobs_.end() || it->second.status != JobStatus::Processing) return;
    check(id);
    if (it->second.status == JobStatus::Processing && !it->second.superseded) schedule_poll(id, attempt + 1);
  });
}

void MixClient::receive_webhook(const std::string& task_id) {
  for (auto& [id, job] : jobs_) {
    if (job.task_id == task_id && job.status == JobStatus::Processing) {
      check(id);
      return;
    }
  }
}

void MixClient::check(std::uint64_t id) {
  MixJob& job = jobs_.at(id);
  RemoteStatus st;
  try {
    st = backend_.status(job.task_id);
  } catch (const Error& e) {
    st = {RemoteStatus::State::Failed, e.what()};
  }
  if (st.state == RemoteStatus::State::Processing) return;
  if (st.state == RemoteStatus::State::Ready) {
    try {
      job.result = std::make_shared<const AudioBuffer>(backend_.download(job.task_id));
    } catch (const Error& e) {
      st = {RemoteStatus::State::Failed, std::string("download failed: ") + e.what()};
    }
  }
  job.completed_at = runtime_.now();
  if (st.state == RemoteStatus::State::Ready) {
    job.transition(JobStatus::Ready);
    if (!job.superseded && on_ready_) on_ready_(job);
  } else {
    job.failure_reason = st.reason;
    job.transition(JobStatus::Failed);
    if (!job.superseded && on_failed_) on_failed_(job);
  }
}

const MixJob* MixClient::job(std::uint64_t id) const {
  auto it = jobs_.find(id);
  return it == jobs_.end() ? nullptr : &it->second;
}

const MixJob* MixClient::find_task(const std::string& task_id) const {
  for (const auto& [id, job] : jobs_) {
    if (job.task_id == task_id) return &job;
  }
  return nullptr;
}

std::vector<const MixJob*> MixClient::jobs() const {
  std::vector<const MixJob*> out;
  for (const auto& [id, job] : jobs_) out.push_back(&job);
  return out;
}

std::vector<const MixJob*> MixClient::active_jobs() const {
  std::vector<const MixJob*> out;
  for (const auto& [id, job] : jobs_) {
    if (job.active()) out.push_back(&job);
  }
  return out;
}

}  // namespace framebeat
