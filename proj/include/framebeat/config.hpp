#pragma once

#include <functional>
#include <memory>
#include <string>

#include <json.hpp>

#include "framebeat/caption.hpp"
#include "framebeat/generation.hpp"
#include "framebeat/mixing.hpp"
#include "framebeat/session.hpp"

namespace framebeat {

/// Application settings: a JSON file plus FRAMEBEAT_* environment overrides.
///
///   {
///     "data_dir": "data",
///     "caption":    {"mode": "mock"|"http", "url": "...", "api_key": "...", "model": "...",
///                    "latency": 1.2, "timeout": 10, "fixtures": "fixtures/captions.json",
///                    "template": "vision_prompt.json"},
///     "generation": {"mode": "mock"|"http", "url": "...", "api_key": "...", "latency": 3.8, "timeout": 30},
///     "mix":        {"mode": "mock", "preview_latency": 5.2, "master_latency": 8.6, "webhook": false},
///     "prompt_tables": "prompt_tables.conf",
///     "lambda": 1.0, "tau": 0.05, "guard": 256, "look_ahead_ms": 250,
///     "auto_mix": false, "ambient_power_law": false,
///     "server": {"host": "127.0.0.1", "port": 8080}
///   }
///
/// Environment: FRAMEBEAT_CAPTION_MODE, FRAMEBEAT_CAPTION_URL, FRAMEBEAT_CAPTION_API_KEY,
/// FRAMEBEAT_CAPTION_LATENCY, FRAMEBEAT_GENERATION_MODE, FRAMEBEAT_GENERATION_URL,
/// FRAMEBEAT_GENERATION_API_KEY, FRAMEBEAT_GENERATION_LATENCY, FRAMEBEAT_MIX_PREVIEW_LATENCY,
/// FRAMEBEAT_MIX_MASTER_LATENCY, FRAMEBEAT_LAMBDA, FRAMEBEAT_TAU, FRAMEBEAT_LOOK_AHEAD_MS,
/// FRAMEBEAT_AUTO_MIX, FRAMEBEAT_DATA_DIR, FRAMEBEAT_PORT.
struct AppConfig {
  nlohmann::json raw;

  static AppConfig defaults();
  static AppConfig load(const std::string& path);
  /// Applies FRAMEBEAT_* variables from the process environment.
  void apply_env();
  void apply_env(const std::function<const char*(const char*)>& getenv);

  std::string data_path(const std::string& relative) const;
  SessionConfig session_config() const;
  /// Sets every mock latency to zero.
  void zero_latency();
};

/// Backends built from an AppConfig; owns them for the session's lifetime.
struct BackendSet {
  std::unique_ptr<CaptionBackend> caption;
  std::unique_ptr<GenerationBackend> generation;
  std::unique_ptr<MixBackend> mix;
  CaptionTemplates templates;
  PromptTables tables;

  static BackendSet build(const AppConfig& config, Runtime& runtime);
  SessionBackends view() const;
};

}  // namespace framebeat
