#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "framebeat/audio.hpp"
#include "framebeat/runtime.hpp"

namespace framebeat {

enum class InstrumentGroup { Keys, Guitar, Bass, Percussion, FullSection };
enum class Presence { Lead, Normal, Background };
enum class Pan { Left, Center, Right };
enum class Reverb { Dry, Room, Hall };

std::string to_string(InstrumentGroup v);
std::string to_string(Presence v);
std::string to_string(Pan v);
std::string to_string(Reverb v);

struct StemMetadata {
  InstrumentGroup instrument_group = InstrumentGroup::FullSection;
  Presence presence_setting = Presence::Normal;
  Pan pan_preference = Pan::Center;
  Reverb reverb_preference = Reverb::Room;
  std::string musical_style;

  /// Defaults for one whole-section stem: normal presence, centered, room.
  static StemMetadata full_section(const std::string& genre);
  friend bool operator==(const StemMetadata&, const StemMetadata&) = default;
};

nlohmann::json to_json(const StemMetadata& m);
StemMetadata stem_metadata_from_json(const nlohmann::json& j);

enum class MixKind { PreviewMix, Master };
enum class JobStatus { Pending, Uploading, Processing, Ready, Failed };
std::string to_string(MixKind v);
std::string to_string(JobStatus v);
bool parse_mix_kind(std::string_view text, MixKind& out);

struct MasterSettings {
  std::string musical_style;
  double target_rms_db = -14.0;
  int sample_rate = kSampleRate;
};

struct Stem {
  std::size_t section_index = 0;
  std::shared_ptr<const AudioBuffer> audio;
  StemMetadata metadata;
  std::string remote_id;
};

struct MixJob {
  std::uint64_t id = 0;
  std::string task_id;
  MixKind kind = MixKind::PreviewMix;
  std::vector<Stem> stems;
  JobStatus status = JobStatus::Pending;
  std::shared_ptr<const AudioBuffer> result;
  double submitted_at = 0.0;
  std::optional<double> completed_at;
  std::string failure_reason;
  bool superseded = false;
  /// Sections contained in the result.
  std::size_t covers_sections = 0;
  /// Placements rendered into the master input.
  std::size_t placement_count = 0;
  std::optional<MasterSettings> master;
  double cost_units = 0.0;

  /// Follows pending -> uploading -> processing -> {ready, failed}; throws
  /// InvalidTransition otherwise.
  void transition(JobStatus next);
  bool active() const { return status != JobStatus::Ready && status != JobStatus::Failed && !superseded; }
};

nlohmann::json job_summary(const MixJob& job);

struct RemoteStatus {
  enum class State { Processing, Ready, Failed } state = State::Processing;
  std::string reason;
};

/// A mixing/mastering service: stems are uploaded, a job is created and
/// returns a task id, completion is polled or pushed to a webhook.
class MixBackend {
 public:
  virtual ~MixBackend() = default;
  virtual std::string name() const = 0;
  /// Throws UploadFailed.
  virtual std::string upload_stem(const AudioBuffer& audio, const StemMetadata& metadata) = 0;
  virtual std::string create_preview(const std::vector<std::string>& stem_ids, const std::string& style) = 0;
  virtual std::string create_master(const std::string& stem_id, const MasterSettings& settings) = 0;
  virtual RemoteStatus status(const std::string& task_id) = 0;
  virtual AudioBuffer download(const std::string& task_id) = 0;
  /// Whether completions are pushed to the registered webhook.
  virtual bool pushes_webhooks() const { return false; }
  virtual void set_webhook(std::function<void(const std::string& task_id)> sink) { (void)sink; }
};

/// In-process stand-in for the mixing service. Preview: sum of the stems
/// at -3 dB with the pan preference applied. Master: gain to the RMS target.
/// Completion is driven by the runtime clock.
class MockMixBackend final : public MixBackend {
 public:
  struct Config {
    double preview_latency = 5.2;
    double master_latency = 8.6;
    bool webhook = false;
  };

  MockMixBackend(Runtime& runtime, Config config);
  std::string name() const override { return "mock"; }
  std::string upload_stem(const AudioBuffer& audio, const StemMetadata& metadata) override;
  std::string create_preview(const std::vector<std::string>& stem_ids, const std::string& style) override;
  std::string create_master(const std::string& stem_id, const MasterSettings& settings) override;
  RemoteStatus status(const std::string& task_id) override;
  AudioBuffer download(const std::string& task_id) override;
  bool pushes_webhooks() const override { return config_.webhook; }
  void set_webhook(std::function<void(const std::string&)> sink) override { webhook_ = std::move(sink); }

  Config& config() { return config_; }
  void fail_next_upload() { fail_upload_ = true; }
  void fail_next_job(std::string reason) { fail_job_ = std::move(reason); }
  std::size_t status_calls() const { return status_calls_; }

 private:
  struct Task {
    double ready_at = 0.0;
    std::optional<std::string> failure;
    AudioBuffer result;
  };
  std::string add_task(AudioBuffer result, double latency);

  Runtime& runtime_;
  Config config_;
  std::map<std::string, std::pair<AudioBuffer, StemMetadata>> stems_;
  std::map<std::string, Task> tasks_;
  std::function<void(const std::string&)> webhook_;
  bool fail_upload_ = false;
  std::optional<std::string> fail_job_;
  std::uint64_t next_id_ = 1;
  std::size_t status_calls_ = 0;
};

AudioBuffer mock_mix(const std::vector<std::pair<const AudioBuffer*, StemMetadata>>& stems);
AudioBuffer mock_master(const AudioBuffer& input, double target_rms_db = -14.0);

/// Polling delays after submission: 1, 2, 4, 8, 16, 16, ... seconds.
double poll_delay(std::size_t attempt, double base = 1.0, double cap = 16.0);

struct MixClientConfig {
  double poll_base = 1.0;
  double poll_cap = 16.0;
  double cost_per_preview_stem = 0.05;
  double cost_per_master = 0.15;
};

/// Owns mix jobs. Callbacks run on the runtime's owner.
class MixClient {
 public:
  using Callback = std::function<void(const MixJob&)>;

  MixClient(Runtime& runtime, MixBackend& backend, MixClientConfig config = {});

  void on_ready(Callback cb) { on_ready_ = std::move(cb); }
  void on_failed(Callback cb) { on_failed_ = std::move(cb); }

  /// Throws TooFewSections for fewer than two stems, UploadFailed.
  const MixJob& submit_preview_mix(std::vector<Stem> stems, const std::string& style);
  /// `arrangement` is the rendered concatenation of `covers_sections`
  /// sections. Throws TooFewSections for zero sections, UploadFailed.
  const MixJob& submit_master(std::shared_ptr<const AudioBuffer> arrangement, std::size_t covers_sections,
                              std::size_t placement_count, const MasterSettings& settings);

  /// Webhook entry point.
  void receive_webhook(const std::string& task_id);

  const MixJob* job(std::uint64_t id) const;
  const MixJob* find_task(const std::string& task_id) const;
  std::vector<const MixJob*> jobs() const;
  std::vector<const MixJob*> active_jobs() const;

 private:
  MixJob& create(MixKind kind);
  void schedule_poll(std::uint64_t id, std::size_t attempt);
  void check(std::uint64_t id);

  Runtime& runtime_;
  MixBackend& backend_;
  MixClientConfig config_;
  std::map<std::uint64_t, MixJob> jobs_;
  std::uint64_t next_id_ = 1;
  Callback on_ready_;
  Callback on_failed_;
};

}  // namespace framebeat
