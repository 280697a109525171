#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "framebeat/role.hpp"

namespace framebeat {

/// Button order on the controller; also the LED bit order.
enum class Button { Keys = 0, Guitar = 1, Bass = 2, Percussion = 3, Capture = 4 };
inline constexpr int kButtonCount = 5;
std::string to_string(Button b);

enum class EdgeKind { Down, Up };

struct DeviceEvent {
  EdgeKind kind = EdgeKind::Down;
  Button button = Button::Keys;
  std::uint32_t at_ms = 0;
  friend bool operator==(const DeviceEvent&, const DeviceEvent&) = default;
};

struct DisplayAck {
  friend bool operator==(const DisplayAck&, const DisplayAck&) = default;
};

struct DisplayState {
  static constexpr std::size_t kGenreWidth = 16;

  int bpm = 0;
  SectionRole section_role = SectionRole::Verse;
  int audio_level = 0;    // 0..15
  std::uint8_t led_mask = 0;  // bit i = Button(i)
  std::string genre;

  bool led(Button b) const { return (led_mask >> static_cast<int>(b)) & 1u; }
  friend bool operator==(const DisplayState&, const DisplayState&) = default;
};

using DeviceMessage = std::variant<DeviceEvent, DisplayAck, DisplayState>;

/// `D <bpm> <role> <level> <led_hex> <genre>\n`; genre cut to 16 characters.
std::string encode_display(const DisplayState& state);
/// `B <idx> <d|u> <ms>\n`
std::string encode_event(const DeviceEvent& event);
std::string encode_ack();

/// Parses one line (trailing newline optional). Throws ProtocolError for
/// unknown or reserved opcodes, bad arity and out-of-range fields.
DeviceMessage parse_line(std::string_view line);
std::string encode(const DeviceMessage& message);

/// Audio level 0..15 from an RMS value, -60 dBFS..0 dBFS mapped linearly.
int level_from_rms(double rms);

/// Raw edge as sampled from a switch, possibly bouncing.
struct RawEdge {
  Button button = Button::Keys;
  bool pressed = false;
  std::uint32_t at_ms = 0;
};

struct SimulatorOutput {
  std::vector<DeviceEvent> events;
  /// LED state after each emitted event (optimistic toggles).
  std::vector<std::uint8_t> led_after;
};

/// Host-side model of the controller firmware: 30 ms lock-out debounce per
/// button, instrument buttons toggle their LED on press, capture only emits.
/// A `D` line from the host overwrites the LEDs.
class FirmwareSimulator {
 public:
  static constexpr std::uint32_t kDebounceMs = 30;

  /// Feeds one raw edge; returns the debounced event it produced, if any.
  std::optional<DeviceEvent> feed(const RawEdge& edge);
  /// Flushes lock-out windows that have ended by `now_ms`.
  std::vector<DeviceEvent> flush(std::uint32_t now_ms);
  void apply_display(const DisplayState& state);

  std::uint8_t led_mask() const noexcept { return leds_; }
  const DisplayState& display() const noexcept { return display_; }

 private:
  struct ButtonState {
    bool stable = false;   // last reported level
    bool raw = false;      // last sampled level
    std::uint32_t last_event_ms = 0;
    bool locked = false;
  };
  std::optional<DeviceEvent> emit(Button b, bool pressed, std::uint32_t at_ms);

  std::array<ButtonState, kButtonCount> buttons_{};
  std::uint8_t leds_ = 0;
  DisplayState display_;
};

/// Runs a whole time-ordered edge list through the simulator.
SimulatorOutput simulate_firmware(const std::vector<RawEdge>& edges);

}  // namespace framebeat
