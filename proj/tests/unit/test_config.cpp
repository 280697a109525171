#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "framebeat/config.hpp"
#include "framebeat/error.hpp"
#include "support.hpp"

using namespace framebeat;

namespace {

std::string temp_file(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << content;
  return path.string();
}

}  // namespace

TEST_CASE("defaults map onto the session config") {
  const AppConfig c = AppConfig::defaults();
  const SessionConfig s = c.session_config();
  CHECK(s.lambda == 1.0);
  CHECK(s.selection.transient.threshold == 0.05);
  CHECK(s.selection.transient.guard == 256);
  CHECK(s.look_ahead == Time(1, 4));
  CHECK_FALSE(s.auto_mix);
  CHECK(s.default_bpm == 100.0);
  CHECK(c.raw["mix"]["preview_latency"] == 5.2);
  CHECK(c.data_path("prompt_tables.conf") == fbtest::data_path("prompt_tables.conf"));
  CHECK(c.data_path("/abs/file") == "/abs/file");
}

TEST_CASE("file overrides merge over defaults") {
  const auto path = temp_file("framebeat_cfg.json", R"({"lambda": 2.5, "mix": {"webhook": true}, "look_ahead_ms": 500})");
  const AppConfig c = AppConfig::load(path);
  CHECK(c.raw["lambda"] == 2.5);
  CHECK(c.raw["mix"]["webhook"] == true);
  CHECK(c.raw["mix"]["preview_latency"] == 5.2);
  CHECK(c.session_config().look_ahead == Time(1, 2));
  std::filesystem::remove(path);

  CHECK(fbtest::code_of([] { AppConfig::load("/nonexistent/framebeat.json"); }) == ErrorCode::IoError);
  const auto bad = temp_file("framebeat_bad.json", "{nope");
  CHECK(fbtest::code_of([&] { AppConfig::load(bad); }) == ErrorCode::ConfigError);
  std::filesystem::remove(bad);
}

TEST_CASE("environment overrides") {
  std::map<std::string, std::string> env{{"FRAMEBEAT_LAMBDA", "0.5"},
                                         {"FRAMEBEAT_AUTO_MIX", "true"},
                                         {"FRAMEBEAT_CAPTION_MODE", "http"},
                                         {"FRAMEBEAT_CAPTION_URL", "http://127.0.0.1:9/v1"},
                                         {"FRAMEBEAT_MIX_PREVIEW_LATENCY", "60"},
                                         {"FRAMEBEAT_PORT", "9090"}};
  auto getenv = [&](const char* name) -> const char* {
    auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  };
  AppConfig c = AppConfig::defaults();
  c.apply_env(getenv);
  CHECK(c.raw["lambda"] == 0.5);
  CHECK(c.raw["auto_mix"] == true);
  CHECK(c.raw["caption"]["mode"] == "http");
  CHECK(c.raw["caption"]["url"] == "http://127.0.0.1:9/v1");
  CHECK(c.raw["mix"]["preview_latency"] == 60.0);
  CHECK(c.raw["server"]["port"] == 9090.0);
  CHECK(c.session_config().auto_mix);

  env["FRAMEBEAT_TAU"] = "loud";
  CHECK(fbtest::code_of([&] { c.apply_env(getenv); }) == ErrorCode::ConfigError);
  env.erase("FRAMEBEAT_TAU");
  env["FRAMEBEAT_LAMBDA"] = "-1";
  c.apply_env(getenv);
  CHECK(fbtest::code_of([&] { c.session_config(); }) == ErrorCode::ConfigError);
}

TEST_CASE("backend set from config") {
  VirtualRuntime rt;
  AppConfig c = AppConfig::defaults();
  BackendSet set = BackendSet::build(c, rt);
  CHECK(set.caption->name() == "mock");
  CHECK(set.generation->name() == "mock");
  CHECK(set.mix->name() == "mock");
  CHECK(set.tables.version == "tables-1");
  CHECK(set.templates.version == "vision-1");
  const SessionBackends view = set.view();
  CHECK(view.caption == set.caption.get());

  c.raw["caption"]["mode"] = "http";
  c.raw["generation"]["mode"] = "http";
  set = BackendSet::build(c, rt);
  CHECK(set.caption->name() == "http");
  CHECK(set.generation->name() == "http");

  c.raw["mix"]["mode"] = "remote";
  CHECK(fbtest::code_of([&] { BackendSet::build(c, rt); }) == ErrorCode::ConfigError);
  c = AppConfig::defaults();
  c.raw["caption"]["fixtures"] = "missing.json";
  CHECK(fbtest::code_of([&] { BackendSet::build(c, rt); }).has_value());
}

TEST_CASE("zero latency clears every mock delay") {
  AppConfig c = AppConfig::defaults();
  c.zero_latency();
  CHECK(c.raw["caption"]["latency"] == 0.0);
  CHECK(c.raw["generation"]["latency"] == 0.0);
  CHECK(c.raw["mix"]["preview_latency"] == 0.0);
  CHECK(c.raw["mix"]["master_latency"] == 0.0);
}
