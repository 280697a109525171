#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "framebeat/compose.hpp"
#include "framebeat/config.hpp"
#include "framebeat/error.hpp"
#include "framebeat/session.hpp"
#include "support.hpp"

using namespace framebeat;

namespace {

struct Rig {
  VirtualRuntime rt;
  MockCaptionBackend caption;
  MockGenerationBackend generation;
  MockMixBackend mix;
  Orchestrator orch;

  explicit Rig(double caption_latency = 0.0, double generation_latency = 0.0, SessionConfig config = {},
               SceneCaption fallback = MockCaptionBackend::default_caption())
      : caption(fixture_backend(fallback, caption_latency)),
        generation(generation_latency),
        mix(rt, MockMixBackend::Config{}),
        orch(rt, backends(), std::move(config)) {
    orch.start();
  }

  static MockCaptionBackend fixture_backend(const SceneCaption& fallback, double latency) {
    MockCaptionBackend file = MockCaptionBackend::from_file(fbtest::data_path("fixtures/captions.json"));
    std::unordered_map<std::uint64_t, MockCaptionBackend::Fixture> table;
    for (const auto& name : fbtest::fixture_names()) {
      const auto hash = fbtest::fixture_frame(name).hash();
      table[hash] = *file.find(hash);
    }
    return MockCaptionBackend(std::move(table), fallback, latency);
  }

  SessionBackends backends() {
    SessionBackends b;
    b.caption = &caption;
    b.generation = &generation;
    b.mix = &mix;
    return b;
  }

  void feed_all(const InstrumentSelection& sel) {
    for (const auto& name : fbtest::fixture_names()) {
      while (orch.pending_captures() >= 2) rt.step();
      orch.handle_capture(fbtest::fixture_frame(name), sel);
    }
    rt.run_until_idle();
  }

  std::vector<SessionEvent> of_kind(const std::string& kind) const {
    std::vector<SessionEvent> out;
    for (const auto& e : orch.events().all()) {
      if (e.kind == kind) out.push_back(e);
    }
    return out;
  }
};

CaptureFrame unknown_frame() {
  auto bytes = fbtest::read_bytes(fbtest::data_path("fixtures/images/night_street.jpg"));
  bytes.push_back(0x00);
  return CaptureFrame::from_jpeg(std::move(bytes));
}

const InstrumentSelection kKeysGuitar = InstrumentSelection::of({Instrument::Keys, Instrument::Guitar});

}  // namespace

TEST_CASE("three captures become three chained sections") {
  Rig rig;
  rig.feed_all(kKeysGuitar);
  const auto sections = rig.orch.engine().sections();
  REQUIRE(sections.size() == 3);
  const SessionClock clock = *rig.orch.clock();
  CHECK(clock.bpm() == 90.0);
  CHECK(*rig.orch.genre() == "ambient chill");
  const Time cf = crossfade_window(clock);
  CHECK(sections[0].start_time == Time(0));
  for (std::size_t k = 0; k + 1 < sections.size(); ++k) {
    CHECK(sections[k + 1].start_time - sections[k].start_time == sections[k].length - cf);
    CHECK(sections[k + 1].downbeat == quantize_to_bar(sections[k + 1].start_time, clock));
    CHECK(is_bar_aligned(sections[k + 1].downbeat, clock));
  }
  for (const auto& s : sections) {
    CHECK(s.bar_count == fit_bars(Time(15), clock));
    CHECK(s.length == Time(s.bar_count) * clock.bar());
  }
  std::string golden = fbtest::read_text(fbtest::data_path("golden/prompt_night_street_k1.txt"));
  golden.erase(golden.find_last_not_of("\r\n") + 1);
  CHECK(sections[1].prompt.find("same sound palette as previous section") != std::string::npos);
  CHECK(sections[0].prompt.find("previous section") == std::string::npos);
  CHECK(rig.orch.idle());
  CHECK(rig.orch.export_render().frames() == static_cast<std::size_t>(to_samples(sections[2].end_time())));
}

TEST_CASE("golden prompt for the night street verse at k=1") {
  Rig rig;
  const auto frame = fbtest::fixture_frame("night_street");
  rig.orch.handle_capture(frame, kKeysGuitar);
  rig.orch.handle_capture(frame, kKeysGuitar);
  rig.rt.run_until_idle();
  const auto sections = rig.orch.engine().sections();
  REQUIRE(sections.size() == 2);
  std::string golden = fbtest::read_text(fbtest::data_path("golden/prompt_night_street_k1.txt"));
  golden.erase(golden.find_last_not_of("\r\n") + 1);
  CHECK(sections[1].prompt == golden);
}

TEST_CASE("event log records the pipeline in order") {
  Rig rig;
  rig.feed_all(kKeysGuitar);
  const auto events = rig.orch.events().all();
  for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].seq == i + 1);
  CHECK(rig.of_kind("capture").size() == 3);
  CHECK(rig.of_kind("caption_ready").size() == 3);
  CHECK(rig.of_kind("generation_ready").size() == 3);
  CHECK(rig.of_kind("section_scheduled").size() == 3);
  const auto lock = rig.of_kind("control");
  REQUIRE(lock.size() == 1);
  CHECK(lock[0].payload["action"] == "lock");
  CHECK(lock[0].payload["bpm_defaulted"] == false);
  const auto scheduled = rig.of_kind("section_scheduled");
  CHECK(scheduled[0].payload["crossfade"]["window_samples"] == to_samples(crossfade_window(*rig.orch.clock())));
  CHECK(rig.orch.events().since(events.size() - 1).size() == 1);
  CHECK(rig.orch.events().since(events.size()).empty());
}

TEST_CASE("capture rejections") {
  VirtualRuntime rt;
  MockCaptionBackend caption({}, MockCaptionBackend::default_caption());
  MockGenerationBackend generation;
  MockMixBackend mix(rt, {});
  SessionBackends b;
  b.caption = &caption;
  b.generation = &generation;
  b.mix = &mix;
  Orchestrator orch(rt, b);
  const auto frame = fbtest::fixture_frame("beach_morning");
  CHECK(fbtest::code_of([&] { orch.handle_capture(frame); }) == ErrorCode::SessionNotActive);
  orch.start();
  CHECK(fbtest::code_of([&] { orch.handle_capture(frame, InstrumentSelection{}); }) == ErrorCode::InstrumentCapViolation);
  CHECK(fbtest::code_of([&] { orch.handle_capture(CaptureFrame{}); }) == ErrorCode::InvalidFrame);
  CHECK(fbtest::code_of([&] { orch.request_master(); }) == ErrorCode::InvalidState);
  CHECK(fbtest::code_of([&] { orch.export_render(); }) == ErrorCode::InvalidState);
  b.mix = nullptr;
  CHECK(fbtest::code_of([&] { Orchestrator o(rt, b); }) == ErrorCode::ConfigError);
}

TEST_CASE("back-pressure beyond two captures in flight") {
  Rig rig(1.2, 3.8);
  rig.orch.handle_capture(fbtest::fixture_frame("night_street"));
  rig.orch.handle_capture(fbtest::fixture_frame("beach_morning"));
  CHECK(rig.orch.pending_captures() == 2);
  CHECK(fbtest::code_of([&] { rig.orch.handle_capture(fbtest::fixture_frame("forest_rain")); }) == ErrorCode::BackPressure);
  rig.rt.run_until_idle();
  CHECK(rig.orch.pending_captures() == 0);
  CHECK_NOTHROW(rig.orch.handle_capture(fbtest::fixture_frame("forest_rain")));
}

TEST_CASE("first surviving caption locks tempo and genre") {
  Rig rig(1.2, 3.8);
  rig.caption.fail_next(1);
  rig.orch.handle_capture(fbtest::fixture_frame("night_street"));
  rig.orch.handle_capture(fbtest::fixture_frame("beach_morning"));
  rig.rt.run_until_idle();
  CHECK(rig.orch.captures()[0].state == CaptureState::Failed);
  REQUIRE(rig.orch.clock());
  CHECK(rig.orch.clock()->bpm() == 118.0);
  CHECK(*rig.orch.genre() == "tropical house");
  const auto sections = rig.orch.engine().sections();
  REQUIRE(sections.size() == 1);
  CHECK(sections[0].capture_index == 1);
  CHECK(rig.of_kind("error").at(0).payload["stage"] == "caption");
}

TEST_CASE("missing tempo defaults to 100 BPM") {
  SceneCaption fallback = MockCaptionBackend::default_caption();
  fallback.bpm.reset();
  fallback.genre.clear();
  Rig rig(0.0, 0.0, {}, fallback);
  rig.orch.handle_capture(unknown_frame());
  rig.rt.run_until_idle();
  REQUIRE(rig.orch.clock());
  CHECK(rig.orch.clock()->bpm() == 100.0);
  CHECK(*rig.orch.genre() == "ambient");
  CHECK(rig.of_kind("control").at(0).payload["bpm_defaulted"] == true);
}

TEST_CASE("later genres and tempos never override the locked style") {
  Rig rig;
  rig.feed_all(InstrumentSelection::of({Instrument::Bass}));
  for (const auto& e : rig.of_kind("section_scheduled")) {
    CHECK(e.payload["bpm"] == 90.0);
    CHECK(e.payload["genre"] == "ambient chill");
    CHECK(e.payload["prompt"].get<std::string>().find("tropical house") == std::string::npos);
  }
}

TEST_CASE("failed generation is reported and the session keeps going") {
  Rig rig;
  rig.generation.fail_next(2);
  rig.feed_all(kKeysGuitar);
  CHECK(rig.orch.captures()[0].state == CaptureState::Failed);
  CHECK(rig.orch.captures()[0].generation_attempts == 2);
  const auto sections = rig.orch.engine().sections();
  REQUIRE(sections.size() == 2);
  CHECK(sections[0].capture_index == 1);
  CHECK(sections[0].start_time == Time(0));
  const auto errors = rig.of_kind("error");
  REQUIRE(errors.size() == 1);
  CHECK(errors[0].payload["stage"] == "generation");
  CHECK(errors[0].payload["code"] == "BackendUnavailable");
}

TEST_CASE("sections are scheduled in capture order when generation finishes out of order") {
  Rig rig(0.0, 3.8);
  rig.orch.handle_capture(fbtest::fixture_frame("night_street"));
  rig.rt.run_until(1.0);
  rig.generation.set_latency(0.5);
  rig.orch.handle_capture(fbtest::fixture_frame("beach_morning"));
  rig.rt.run_until(2.0);
  CHECK(rig.orch.captures()[1].state == CaptureState::Ready);
  CHECK(rig.orch.engine().sections().empty());
  rig.rt.run_until_idle();
  const auto sections = rig.orch.engine().sections();
  REQUIRE(sections.size() == 2);
  CHECK(sections[0].capture_index == 0);
  CHECK(sections[1].capture_index == 1);
}

TEST_CASE("latency report under default mock latencies") {
  Rig rig(1.2, 3.8);
  rig.feed_all(kKeysGuitar);
  const LatencyReport r = rig.orch.latency_report();
  CHECK(r.simulated_clock);
  CHECK(r.sections == 3);
  CHECK(r.caption.min >= 1.2);
  CHECK(r.generation.min >= 3.8);
  CHECK(r.end_to_end.mean >= 5.0);
  CHECK(r.end_to_end.max <= 6.5);
  CHECK(r.caption_cost == doctest::Approx(3 * 0.002));
  CHECK(r.generation_cost == doctest::Approx(3 * 0.14));
  const auto j = r.to_json();
  CHECK(j["clock"] == "simulated");
  CHECK(j["stages"]["end_to_end"]["count"] == 3);
  CHECK(j["cost"]["total"].get<double>() == doctest::Approx(r.total_cost()));
}

TEST_CASE("auto mix submits a preview once two sections exist") {
  SessionConfig config;
  config.auto_mix = true;
  Rig rig(0.0, 0.0, config);
  rig.orch.start_playback(false);
  for (const auto& name : fbtest::fixture_names()) {
    while (rig.orch.pending_captures() >= 2) rig.rt.step();
    rig.orch.handle_capture(fbtest::fixture_frame(name));
  }
  rig.rt.run_until(30.0);
  rig.orch.stop_playback();
  rig.rt.run_until_idle();
  const auto submitted = rig.of_kind("mix_submitted");
  REQUIRE(submitted.size() == 2);
  CHECK(submitted[0].payload["stems"].size() == 2);
  CHECK(submitted[1].payload["stems"].size() == 3);
  const auto scheduled = rig.of_kind("swap_scheduled");
  const auto committed = rig.of_kind("swap_committed");
  REQUIRE(!committed.empty());
  const SessionClock clock = *rig.orch.clock();
  for (const auto& e : scheduled) CHECK(is_bar_aligned(parse_time(e.payload["boundary"]), clock));
  for (const auto& e : committed) {
    const Time boundary = parse_time(e.payload["boundary"]);
    CHECK(is_bar_aligned(boundary, clock));
    CHECK(e.payload["playhead"].get<std::int64_t>() >= to_samples(boundary));
  }
}

TEST_CASE("instrument toggles keep one to three instruments") {
  Rig rig;
  CHECK(rig.orch.instruments().names() == std::vector<std::string>{"keys"});
  CHECK_FALSE(rig.orch.toggle_instrument(Instrument::Keys));
  CHECK(rig.orch.toggle_instrument(Instrument::Guitar));
  CHECK(rig.orch.toggle_instrument(Instrument::Bass));
  CHECK_FALSE(rig.orch.toggle_instrument(Instrument::Percussion));
  CHECK(rig.orch.instruments().instruments().size() == 3);
  CHECK(rig.orch.toggle_instrument(Instrument::Keys));
  CHECK(rig.orch.instruments().instruments().size() == 2);
  CHECK(fbtest::code_of([&] { rig.orch.select_instruments(InstrumentSelection{}); }) == ErrorCode::InstrumentCapViolation);
}

TEST_CASE("display state mirrors the session") {
  Rig rig(1.2, 3.8);
  DisplayState d = rig.orch.display_state(20);
  CHECK(d.bpm == 0);
  CHECK(d.audio_level == 15);
  CHECK(d.genre.empty());
  rig.orch.handle_capture(fbtest::fixture_frame("beach_morning"));
  d = rig.orch.display_state();
  CHECK((d.led_mask & (1u << static_cast<int>(Button::Capture))) != 0);
  rig.rt.run_until_idle();
  d = rig.orch.display_state(7);
  CHECK(d.bpm == 118);
  CHECK(d.section_role == SectionRole::Chorus);
  CHECK(d.genre == "tropical house");
  CHECK(d.led_mask == (1u << static_cast<int>(Instrument::Keys)));
  const auto snap = rig.orch.snapshot(7);
  CHECK(snap["display"]["line"] == encode_display(d));
  CHECK(snap["sections"].size() == 1);
  CHECK(snap["session"]["bpm"] == 118.0);
}

TEST_CASE("jsonl log round-trips") {
  Rig rig;
  rig.feed_all(kKeysGuitar);
  std::stringstream buf;
  rig.orch.events().write_jsonl(buf, rig.orch.log_header());
  const RecordedSession rec = RecordedSession::parse(buf);
  CHECK(rec.header["schema"] == EventLog::kSchema);
  CHECK(rec.header["session_id"] == rig.orch.id());
  REQUIRE(rec.events.size() == rig.orch.events().last_seq());
  for (std::size_t i = 0; i < rec.events.size(); ++i) {
    CHECK(to_json(rec.events[i]) == to_json(rig.orch.events().all()[i]));
  }
}

TEST_CASE("malformed logs are rejected") {
  std::stringstream empty;
  CHECK(fbtest::code_of([&] { RecordedSession::parse(empty); }) == ErrorCode::ConfigError);
  std::stringstream wrong(R"({"schema":"other","version":1})" "\n");
  CHECK(fbtest::code_of([&] { RecordedSession::parse(wrong); }) == ErrorCode::ConfigError);
  std::stringstream gap(R"({"schema":"framebeat.session-log","version":1})" "\n"
                        R"({"seq":2,"at":0,"kind":"control","payload":{}})" "\n");
  CHECK(fbtest::code_of([&] { RecordedSession::parse(gap); }) == ErrorCode::ConfigError);
  std::stringstream junk(R"({"schema":"framebeat.session-log","version":1})" "\nnot json\n");
  CHECK(fbtest::code_of([&] { RecordedSession::parse(junk); }) == ErrorCode::ConfigError);
}

TEST_CASE("replay reproduces the export with mixes and mastering") {
  AppConfig config = AppConfig::defaults();
  ComposeOptions options;
  options.frames = load_frames({fbtest::data_path("fixtures/images/night_street.jpg"),
                                fbtest::data_path("fixtures/images/beach_morning.jpg"),
                                fbtest::data_path("fixtures/images/forest_rain.jpg")});
  options.instruments = kKeysGuitar;
  options.auto_mix = true;
  options.master = true;
  const ComposeResult result = compose(config, options);
  int swaps = 0;
  for (const auto& e : result.events) swaps += e.kind == "swap_committed";
  CHECK(swaps >= 2);
  std::stringstream log(result.log_jsonl());
  const AudioBuffer replayed = replay_render(RecordedSession::parse(log));
  CHECK(fingerprint(replayed) == fingerprint(result.audio));

  RecordedSession tampered = result.recorded();
  for (auto& e : tampered.events) {
    if (e.kind == "section_scheduled") {
      e.payload["fingerprint"] = "0000000000000000";
      break;
    }
  }
  CHECK(fbtest::code_of([&] { replay_render(tampered); }) == ErrorCode::InvalidState);
  RecordedSession live = result.recorded();
  live.header["backends"]["generation"] = "http";
  CHECK(fbtest::code_of([&] { replay_render(live); }) == ErrorCode::InvalidState);
}
