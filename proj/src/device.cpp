#include "framebeat/device.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "framebeat/audio.hpp"
#include "framebeat/error.hpp"

namespace framebeat {

namespace {

std::vector<std::string_view> split_fields(std::string_view s, std::size_t max_fields) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size() && out.size() + 1 < max_fields) {
    const auto sp = s.find(' ', i);
    if (sp == std::string_view::npos) break;
    out.push_back(s.substr(i, sp - i));
    i = sp + 1;
  }
  out.push_back(s.substr(i));
  return out;
}

template <typename T>
T parse_int(std::string_view text, int base, const char* what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::ProtocolError, std::string("bad ") + what + " '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::string to_string(Button b) {
  switch (b) {
    case Button::Keys: return "keys";
    case Button::Guitar: return "guitar";
    case Button::Bass: return "bass";
    case Button::Percussion: return "percussion";
    case Button::Capture: return "capture";
  }
  return "keys";
}

std::string encode_display(const DisplayState& s) {
  char head[64];
  std::snprintf(head, sizeof head, "D %d %s %d %02X ", s.bpm, to_string(s.section_role).c_str(), s.audio_level,
                static_cast<unsigned>(s.led_mask & 0x1F));
  std::string genre = s.genre.substr(0, DisplayState::kGenreWidth);
  std::replace(genre.begin(), genre.end(), '\n', ' ');
  std::replace(genre.begin(), genre.end(), '\r', ' ');
  return std::string(head) + genre + "\n";
}

std::string encode_event(const DeviceEvent& e) {
  return "B " + std::to_string(static_cast<int>(e.button)) + (e.kind == EdgeKind::Down ? " d " : " u ") +
         std::to_string(e.at_ms) + "\n";
}

std::string encode_ack() { return "A\n"; }

std::string encode(const DeviceMessage& m) {
  if (const auto* e = std::get_if<DeviceEvent>(&m)) return encode_event(*e);
  if (const auto* d = std::get_if<DisplayState>(&m)) return encode_display(*d);
  return encode_ack();
}

DeviceMessage parse_line(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.empty()) throw Error(ErrorCode::ProtocolError, "empty line");
  const char op = line[0];
  if (op == 'A') {
    if (line.size() != 1) throw Error(ErrorCode::ProtocolError, "ack takes no arguments");
    return DisplayAck{};
  }
  if (line.size() < 2 || line[1] != ' ') {
    throw Error(ErrorCode::ProtocolError, "unknown opcode '" + std::string(line.substr(0, 8)) + "'");
  }
  if (op == 'B') {
    const auto f = split_fields(line.substr(2), 8);
    if (f.size() != 3) throw Error(ErrorCode::ProtocolError, "button line needs 3 fields");
    const int idx = parse_int<int>(f[0], 10, "button index");
    if (idx < 0 || idx >= kButtonCount) throw Error(ErrorCode::ProtocolError, "button index out of range");
    if (f[1] != "d" && f[1] != "u") throw Error(ErrorCode::ProtocolError, "edge must be d or u");
    DeviceEvent e;
    e.button = static_cast<Button>(idx);
    e.kind = f[1] == "d" ? EdgeKind::Down : EdgeKind::Up;
    e.at_ms = parse_int<std::uint32_t>(f[2], 10, "timestamp");
    return e;
  }
  if (op == 'D') {
    // The genre is free text and may contain spaces, so it takes the rest.
    const auto f = split_fields(line.substr(2), 5);
    if (f.size() != 5) throw Error(ErrorCode::ProtocolError, "display line needs 5 fields");
    DisplayState s;
    s.bpm = parse_int<int>(f[0], 10, "bpm");
    if (s.bpm < 0 || s.bpm > 999) throw Error(ErrorCode::ProtocolError, "bpm out of range");
    if (!parse_section_role(f[1], s.section_role) || f[1] != to_string(s.section_role)) {
      throw Error(ErrorCode::ProtocolError, "bad section role '" + std::string(f[1]) + "'");
    }
    s.audio_level = parse_int<int>(f[2], 10, "level");
    if (s.audio_level < 0 || s.audio_level > 15) throw Error(ErrorCode::ProtocolError, "level out of range");
    if (f[3].size() != 2) throw Error(ErrorCode::ProtocolError, "led mask must be two hex digits");
    const int mask = parse_int<int>(f[3], 16, "led mask");
    if (mask > 0x1F || f[3] != [&] {
          char buf[3];
          std::snprintf(buf, sizeof buf, "%02X", mask);
          return std::string(buf);
        }()) {
      throw Error(ErrorCode::ProtocolError, "bad led mask '" + std::string(f[3]) + "'");
    }
    s.led_mask = static_cast<std::uint8_t>(mask);
    if (f[4].size() > DisplayState::kGenreWidth) throw Error(ErrorCode::ProtocolError, "genre longer than 16");
    s.genre = std::string(f[4]);
    return s;
  }
  if (op >= 'E' && op <= 'Z' && op != 'D' && op != 'B') {
    throw Error(ErrorCode::ProtocolError, std::string("reserved opcode '") + op + "'");
  }
  throw Error(ErrorCode::ProtocolError, std::string("unknown opcode '") + op + "'");
}

int level_from_rms(double rms) {
  if (!(rms > 0.0)) return 0;
  const double db = amplitude_to_db(rms);
  return std::clamp(static_cast<int>(std::floor((db + 60.0) / 60.0 * 15.0 + 0.5)), 0, 15);
}

std::optional<DeviceEvent> FirmwareSimulator::emit(Button b, bool pressed, std::uint32_t at_ms) {
  auto& st = buttons_[static_cast<std::size_t>(b)];
  if (st.stable == pressed) return std::nullopt;
  st.stable = pressed;
  st.last_event_ms = at_ms;
  st.locked = true;
  if (pressed && b != Button::Capture) leds_ ^= static_cast<std::uint8_t>(1u << static_cast<int>(b));
  return DeviceEvent{pressed ? EdgeKind::Down : EdgeKind::Up, b, at_ms};
}

std::optional<DeviceEvent> FirmwareSimulator::feed(const RawEdge& edge) {
  auto& st = buttons_[static_cast<std::size_t>(edge.button)];
  if (st.locked && edge.at_ms >= st.last_event_ms + kDebounceMs) st.locked = false;
  // A window that ended with the switch settled elsewhere reports the
  // settled level before this edge is considered.
  std::optional<DeviceEvent> settled;
  if (!st.locked && st.raw != st.stable) {
    settled = emit(edge.button, st.raw, st.last_event_ms + kDebounceMs);
  }
  st.raw = edge.pressed;
  if (settled) return settled;
  if (st.locked) return std::nullopt;
  return emit(edge.button, edge.pressed, edge.at_ms);
}

std::vector<DeviceEvent> FirmwareSimulator::flush(std::uint32_t now_ms) {
  std::vector<DeviceEvent> out;
  for (int i = 0; i < kButtonCount; ++i) {
    auto& st = buttons_[static_cast<std::size_t>(i)];
    if (!st.locked || now_ms < st.last_event_ms + kDebounceMs) continue;
    st.locked = false;
    if (st.raw != st.stable) {
      if (auto e = emit(static_cast<Button>(i), st.raw, st.last_event_ms + kDebounceMs)) out.push_back(*e);
    }
  }
  return out;
}

void FirmwareSimulator::apply_display(const DisplayState& state) {
  display_ = state;
  leds_ = state.led_mask & 0x1F;
}

SimulatorOutput simulate_firmware(const std::vector<RawEdge>& edges) {
  FirmwareSimulator sim;
  SimulatorOutput out;
  auto push = [&](const DeviceEvent& e) {
    out.events.push_back(e);
    out.led_after.push_back(sim.led_mask());
  };
  for (const auto& edge : edges) {
    for (const auto& e : sim.flush(edge.at_ms)) push(e);
    if (auto e = sim.feed(edge)) push(*e);
  }
  const std::uint32_t end = edges.empty() ? 0 : edges.back().at_ms + FirmwareSimulator::kDebounceMs;
  for (const auto& e : sim.flush(end)) push(e);
  return out;
}

}  // namespace framebeat
