#include "framebeat/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <cmath>
#include <fstream>
#include <sstream>

#include "framebeat/error.hpp"

namespace framebeat {

using nlohmann::json;

AppConfig AppConfig::defaults() {
  AppConfig c;
  c.raw = {{"data_dir", FRAMEBEAT_DATA_DIR},
           {"caption",
            {{"mode", "mock"},
             {"latency", 1.2},
             {"timeout", 10.0},
             {"fixtures", "fixtures/captions.json"},
             {"template", "vision_prompt.json"},
             {"model", "gpt-4-vision-preview"}}},
           {"generation", {{"mode", "mock"}, {"latency", 3.8}, {"timeout", 30.0}}},
           {"mix", {{"mode", "mock"}, {"preview_latency", 5.2}, {"master_latency", 8.6}, {"webhook", false}}},
           {"prompt_tables", "prompt_tables.conf"},
           {"lambda", 1.0},
           {"tau", 0.05},
           {"guard", 256},
           {"look_ahead_ms", 250},
           {"auto_mix", false},
           {"ambient_power_law", false},
           {"server", {{"host", "127.0.0.1"}, {"port", 8080}}}};
  return c;
}

AppConfig AppConfig::load(const std::string& path) {
  AppConfig c = defaults();
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path);
  try {
    json overrides = json::parse(in);
    c.raw.merge_patch(overrides);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
  return c;
}

void AppConfig::apply_env() { apply_env([](const char* name) { return std::getenv(name); }); }

void AppConfig::apply_env(const std::function<const char*(const char*)>& getenv) {
  auto str = [&](const char* var, json& target) {
    if (const char* v = getenv(var)) target = std::string(v);
  };
  auto num = [&](const char* var, json& target) {
    if (const char* v = getenv(var)) {
      try {
        target = std::stod(v);
      } catch (const std::exception&) {
        throw Error(ErrorCode::ConfigError, std::string(var) + " is not a number");
      }
    }
  };
  auto flag = [&](const char* var, json& target) {
    if (const char* v = getenv(var)) {
      const std::string s(v);
      target = s == "1" || s == "true" || s == "yes" || s == "on";
    }
  };
  str("FRAMEBEAT_DATA_DIR", raw["data_dir"]);
  str("FRAMEBEAT_CAPTION_MODE", raw["caption"]["mode"]);
  str("FRAMEBEAT_CAPTION_URL", raw["caption"]["url"]);
  str("FRAMEBEAT_CAPTION_API_KEY", raw["caption"]["api_key"]);
  num("FRAMEBEAT_CAPTION_LATENCY", raw["caption"]["latency"]);
  str("FRAMEBEAT_GENERATION_MODE", raw["generation"]["mode"]);
  str("FRAMEBEAT_GENERATION_URL", raw["generation"]["url"]);
  str("FRAMEBEAT_GENERATION_API_KEY", raw["generation"]["api_key"]);
  num("FRAMEBEAT_GENERATION_LATENCY", raw["generation"]["latency"]);
  num("FRAMEBEAT_MIX_PREVIEW_LATENCY", raw["mix"]["preview_latency"]);
  num("FRAMEBEAT_MIX_MASTER_LATENCY", raw["mix"]["master_latency"]);
  num("FRAMEBEAT_LAMBDA", raw["lambda"]);
  num("FRAMEBEAT_TAU", raw["tau"]);
  num("FRAMEBEAT_LOOK_AHEAD_MS", raw["look_ahead_ms"]);
  flag("FRAMEBEAT_AUTO_MIX", raw["auto_mix"]);
  num("FRAMEBEAT_PORT", raw["server"]["port"]);
}

std::string AppConfig::data_path(const std::string& relative) const {
  std::filesystem::path p(relative);
  if (p.is_absolute()) return p.string();
  return (std::filesystem::path(raw.value("data_dir", std::string(FRAMEBEAT_DATA_DIR))) / p).string();
}

void AppConfig::zero_latency() {
  raw["caption"]["latency"] = 0.0;
  raw["generation"]["latency"] = 0.0;
  raw["mix"]["preview_latency"] = 0.0;
  raw["mix"]["master_latency"] = 0.0;
}

SessionConfig AppConfig::session_config() const {
  SessionConfig s;
  try {
    s.lambda = raw.at("lambda").get<double>();
    s.selection.transient.threshold = raw.at("tau").get<double>();
    s.selection.transient.guard = raw.at("guard").get<std::size_t>();
    const auto ms = static_cast<std::int64_t>(std::llround(raw.at("look_ahead_ms").get<double>()));
    s.look_ahead = Time(ms, 1000);
    s.auto_mix = raw.at("auto_mix").get<bool>();
    s.ambient_power_law = raw.at("ambient_power_law").get<bool>();
    s.caption.timeout_seconds = raw.at("caption").value("timeout", 10.0);
    s.generation.timeout_seconds = raw.at("generation").value("timeout", 30.0);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  if (s.lambda < 0.0) throw Error(ErrorCode::ConfigError, "lambda must be nonnegative");
  return s;
}

BackendSet BackendSet::build(const AppConfig& config, Runtime& runtime) {
  const json& raw = config.raw;
  BackendSet set;
  try {
    const json& cap = raw.at("caption");
    const std::string tpl = cap.value("template", "");
    set.templates = tpl.empty() ? CaptionTemplates::builtin() : CaptionTemplates::load(config.data_path(tpl));
    if (cap.value("mode", "mock") == "mock") {
      const std::string fixtures = cap.value("fixtures", "");
      const double latency = cap.value("latency", 0.0);
      set.caption = std::make_unique<MockCaptionBackend>(
          fixtures.empty() ? MockCaptionBackend({}, MockCaptionBackend::default_caption(), latency)
                           : MockCaptionBackend::from_file(config.data_path(fixtures), latency));
    } else {
      HttpCaptionBackend::Options o;
      o.url = cap.value("url", "");
      o.api_key = cap.value("api_key", "");
      o.model = cap.value("model", o.model);
      o.timeout_seconds = cap.value("timeout", 10.0);
      set.caption = std::make_unique<HttpCaptionBackend>(o);
    }

    const json& gen = raw.at("generation");
    if (gen.value("mode", "mock") == "mock") {
      set.generation = std::make_unique<MockGenerationBackend>(gen.value("latency", 0.0));
    } else {
      HttpGenerationBackend::Options o;
      o.url = gen.value("url", "");
      o.api_key = gen.value("api_key", "");
      o.timeout_seconds = gen.value("timeout", 30.0);
      set.generation = std::make_unique<HttpGenerationBackend>(o);
    }

    const json& mix = raw.at("mix");
    if (mix.value("mode", "mock") != "mock") {
      throw Error(ErrorCode::ConfigError, "only the mock mix backend is available");
    }
    MockMixBackend::Config mc;
    mc.preview_latency = mix.value("preview_latency", 5.2);
    mc.master_latency = mix.value("master_latency", 8.6);
    mc.webhook = mix.value("webhook", false);
    set.mix = std::make_unique<MockMixBackend>(runtime, mc);

    const std::string tables = raw.value("prompt_tables", "");
    set.tables = tables.empty() ? PromptTables::builtin() : PromptTables::load(config.data_path(tables));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return set;
}

SessionBackends BackendSet::view() const {
  SessionBackends b;
  b.caption = caption.get();
  b.generation = generation.get();
  b.mix = mix.get();
  b.templates = templates;
  b.tables = tables;
  return b;
}

}  // namespace framebeat
