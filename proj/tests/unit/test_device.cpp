#include <doctest.h>

#include <random>
#include <sstream>

#include "framebeat/device.hpp"
#include "framebeat/error.hpp"
#include "support.hpp"

using namespace framebeat;

namespace {

bool rejects(std::string_view line) {
  try {
    parse_line(line);
  } catch (const Error& e) {
    return e.code() == ErrorCode::ProtocolError;
  }
  return false;
}

}  // namespace

TEST_CASE("display lines encode bit-exactly") {
  DisplayState s;
  s.bpm = 90;
  s.section_role = SectionRole::Verse;
  s.audio_level = 7;
  s.led_mask = 0x11;
  s.genre = "ambient chill";
  CHECK(encode_display(s) == "D 90 verse 7 11 ambient chill\n");
  CHECK(encode_display(DisplayState{}) == "D 0 verse 0 00 \n");
  s.genre = "a genre twenty chr";
  CHECK(encode_display(s) == "D 90 verse 7 11 a genre twenty c\n");
}

TEST_CASE("parse_line reads events, acks and display lines") {
  const auto e = std::get<DeviceEvent>(parse_line("B 4 d 1042\n"));
  CHECK(e.button == Button::Capture);
  CHECK(e.kind == EdgeKind::Down);
  CHECK(e.at_ms == 1042);
  CHECK(std::holds_alternative<DisplayAck>(parse_line("A\n")));
  const auto d = std::get<DisplayState>(parse_line("D 0 verse 0 00 \n"));
  CHECK(d == DisplayState{});
}

TEST_CASE("parse_line is strict") {
  for (const char* bad : {"B 9 d 0\n", "B 1 x 0\n", "B 1 d\n", "B 1 d -4\n", "B 1 d 12a\n", "A 1\n", "Q\n", "",
                          "D 90 verse 16 11 x\n", "D 90 verse 7 1F0 x\n", "D 90 verse 7 ff x\n",
                          "D 90 verse 7 20 x\n", "D 90 Verse 7 11 x\n", "D 90 verse 7 11 seventeen chars xx\n",
                          "E 1\n", "Z\n", "b 1 d 0\n"}) {
    CHECK_MESSAGE(rejects(bad), bad);
  }
}

TEST_CASE("golden device stream round trips") {
  std::istringstream in(fbtest::read_text(fbtest::data_path("golden/device_stream.txt")));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    CHECK(encode(parse_line(line + "\n")) == line + "\n");
  }
  CHECK(n == 50);
}

TEST_CASE("random events round trip") {
  std::mt19937 rng(77);
  for (int i = 0; i < 1000; ++i) {
    DeviceEvent e{rng() % 2 ? EdgeKind::Down : EdgeKind::Up, static_cast<Button>(rng() % kButtonCount),
                  static_cast<std::uint32_t>(rng())};
    CHECK(std::get<DeviceEvent>(parse_line(encode_event(e))) == e);
  }
}

TEST_CASE("level_from_rms maps -60..0 dBFS onto 0..15") {
  CHECK(level_from_rms(0.0) == 0);
  CHECK(level_from_rms(1.0) == 15);
  CHECK(level_from_rms(0.001) == 0);
  CHECK(level_from_rms(std::pow(10.0, -30.0 / 20.0)) == 8);
  CHECK(level_from_rms(4.0) == 15);
}

TEST_CASE("bounces inside the window produce one event") {
  const auto out = simulate_firmware({{Button::Keys, true, 100}, {Button::Keys, false, 103}, {Button::Keys, true, 108}});
  REQUIRE(out.events.size() == 1);
  CHECK(out.events[0] == DeviceEvent{EdgeKind::Down, Button::Keys, 100});
}

TEST_CASE("a release during the lock-out is reported when the window ends") {
  const auto out = simulate_firmware({{Button::Bass, true, 0}, {Button::Bass, false, 12}});
  REQUIRE(out.events.size() == 2);
  CHECK(out.events[1] == DeviceEvent{EdgeKind::Up, Button::Bass, 30});
}

TEST_CASE("instrument presses toggle LEDs, capture does not") {
  const auto out = simulate_firmware({{Button::Keys, true, 0},
                                      {Button::Keys, false, 100},
                                      {Button::Capture, true, 200},
                                      {Button::Capture, false, 300},
                                      {Button::Keys, true, 400},
                                      {Button::Keys, false, 500}});
  REQUIRE(out.events.size() == 6);
  CHECK(out.led_after == std::vector<std::uint8_t>{1, 1, 1, 1, 0, 0});
}

TEST_CASE("debounce bounds event density on fuzzed input") {
  std::mt19937 rng(4242);
  for (int trial = 0; trial < 200; ++trial) {
    const auto edges = fbtest::bouncy_presses(rng, 30);
    const auto out = simulate_firmware(edges);
    std::array<std::optional<std::uint32_t>, kButtonCount> last{};
    std::array<bool, kButtonCount> down{};
    for (const auto& e : out.events) {
      const auto b = static_cast<std::size_t>(e.button);
      if (last[b]) CHECK(e.at_ms >= *last[b] + 30);
      last[b] = e.at_ms;
      CHECK((e.kind == EdgeKind::Down) != down[b]);  // strictly alternating
      down[b] = e.kind == EdgeKind::Down;
    }
    for (bool d : down) CHECK_FALSE(d);  // every press ends released
  }
}

TEST_CASE("LEDs equal the host state xor local toggles") {
  std::mt19937 rng(99);
  FirmwareSimulator sim;
  std::uint8_t host = 0;
  std::uint8_t toggles = 0;
  std::uint32_t t = 0;
  for (int i = 0; i < 500; ++i) {
    if (rng() % 5 == 0) {
      DisplayState d;
      host = static_cast<std::uint8_t>(rng() % 32);
      d.led_mask = host;
      sim.apply_display(d);
      toggles = 0;
    }
    const auto b = static_cast<Button>(rng() % kButtonCount);
    t += 40 + rng() % 50;
    for (const auto& e : sim.flush(t)) (void)e;
    if (auto e = sim.feed({b, true, t}); e && b != Button::Capture) toggles ^= static_cast<std::uint8_t>(1u << int(b));
    t += 40 + rng() % 50;
    for (const auto& e : sim.flush(t)) (void)e;
    sim.feed({b, false, t});
    CHECK(sim.led_mask() == (host ^ toggles));
  }
}
