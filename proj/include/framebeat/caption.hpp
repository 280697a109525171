#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "framebeat/role.hpp"

namespace framebeat {

/// A still frame from the camera or an upload.
struct CaptureFrame {
  std::vector<std::uint8_t> image_bytes;
  int width = 0;
  int height = 0;
  double captured_at = 0.0;

  /// Checks the JPEG magic and reads the dimensions from the first SOF
  /// marker. Throws InvalidFrame.
  static CaptureFrame from_jpeg(std::vector<std::uint8_t> bytes, double captured_at = 0.0);
  std::uint64_t hash() const;
};

struct SceneCaption {
  std::string description;
  std::vector<std::string> objects;
  std::vector<std::string> mood;
  SectionRole section_role = SectionRole::Verse;
  std::string genre;
  std::optional<double> bpm;
  /// Non-fatal repairs applied while parsing (defaulted role, clamped bpm...).
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const SceneCaption& caption);
SceneCaption caption_from_json(const nlohmann::json& j);

/// Tolerant parse of a backend reply: strips code fences, accepts the six
/// fields by name, ignores extras, coerces bpm strings, defaults a missing
/// role to verse and clamps bpm to [40, 240]. Throws MalformedCaption.
SceneCaption parse_caption_json(const std::string& text);

/// The instruction sent with each image. Loaded from a versioned asset.
struct CaptionTemplates {
  std::string version;
  std::string instruction;
  std::string strict_instruction;

  static CaptionTemplates builtin();
  static CaptionTemplates load(const std::string& path);
};

struct CaptionReply {
  std::string text;
  double latency_seconds = 0.0;
};

class CaptionBackend {
 public:
  virtual ~CaptionBackend() = default;
  virtual std::string name() const = 0;
  /// Throws BackendUnavailable on transport failure.
  virtual CaptionReply describe(const CaptureFrame& frame, const std::string& instruction) = 0;
};

/// Looks frames up by image hash in a fixtures table.
///
/// Fixtures file:
///   {"version": 1,
///    "default": {caption},
///    "fixtures": {"<16 hex digit FNV-1a of the image>": {"name": "...", "caption": {caption}}}}
class MockCaptionBackend final : public CaptionBackend {
 public:
  struct Fixture {
    std::string name;
    SceneCaption caption;
  };

  MockCaptionBackend(std::unordered_map<std::uint64_t, Fixture> fixtures, SceneCaption fallback,
                     double latency_seconds = 0.0);
  static MockCaptionBackend from_file(const std::string& path, double latency_seconds = 0.0);
  static SceneCaption default_caption();

  std::string name() const override { return "mock"; }
  CaptionReply describe(const CaptureFrame& frame, const std::string& instruction) override;

  void set_latency(double seconds) { latency_ = seconds; }
  /// Replies with this raw text for the next `count` calls (failure injection).
  void inject_replies(std::vector<std::string> replies) { injected_ = std::move(replies); }
  void fail_next(std::size_t count) { failures_ = count; }
  std::size_t calls() const { return calls_; }
  const Fixture* find(std::uint64_t hash) const;

 private:
  std::unordered_map<std::uint64_t, Fixture> fixtures_;
  SceneCaption fallback_;
  double latency_;
  std::vector<std::string> injected_;
  std::size_t failures_ = 0;
  std::size_t calls_ = 0;
  std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
};

/// Chat-completions style vision endpoint: POSTs the instruction and the
/// base64 image, reads choices[0].message.content.
class HttpCaptionBackend final : public CaptionBackend {
 public:
  struct Options {
    std::string url;  // scheme://host[:port]/path
    std::string api_key;
    std::string model = "gpt-4-vision-preview";
    double timeout_seconds = 10.0;
  };
  explicit HttpCaptionBackend(Options options) : options_(std::move(options)) {}
  std::string name() const override { return "http"; }
  CaptionReply describe(const CaptureFrame& frame, const std::string& instruction) override;

 private:
  Options options_;
};

struct CaptionOutcome {
  SceneCaption caption;
  double latency_seconds = 0.0;
  int calls = 0;
};

struct CaptionOptions {
  double timeout_seconds = 10.0;
};

/// One request plus, on MalformedCaption, one repair request with the strict
/// instruction. A reply slower than the timeout counts as BackendUnavailable.
CaptionOutcome caption(const CaptureFrame& frame, CaptionBackend& backend, const CaptionTemplates& templates,
                       const CaptionOptions& options = {});

}  // namespace framebeat
