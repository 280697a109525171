#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "framebeat/caption.hpp"
#include "framebeat/role.hpp"

namespace framebeat {

enum class Instrument { Keys, Guitar, Bass, Percussion };

inline constexpr std::array<Instrument, 4> kAllInstruments{Instrument::Keys, Instrument::Guitar, Instrument::Bass,
                                                          Instrument::Percussion};

std::string to_string(Instrument instrument);
bool parse_instrument(std::string_view text, Instrument& out);

/// 1 to 3 distinct instruments, kept in canonical order
/// (keys, guitar, bass, percussion).
class InstrumentSelection {
 public:
  InstrumentSelection() = default;
  /// Throws InstrumentCapViolation for 0 or more than 3 instruments, or
  /// duplicates; ConfigError for unknown names.
  static InstrumentSelection of(const std::vector<Instrument>& instruments);
  static InstrumentSelection parse(std::string_view comma_separated);
  static InstrumentSelection parse(const std::vector<std::string>& names);

  const std::vector<Instrument>& instruments() const noexcept { return instruments_; }
  bool contains(Instrument i) const;
  bool empty() const noexcept { return instruments_.empty(); }
  std::vector<std::string> names() const;
  std::string join(std::string_view sep = ",") const;

  friend bool operator==(const InstrumentSelection&, const InstrumentSelection&) = default;

 private:
  std::vector<Instrument> instruments_;
};

/// Phrase tables, loaded from a `key = value` text file.
///
///   version = 1
///   role_phrase.<role> = ...
///   modifier.<role> = ...
///   variation.<i> = ...          (i = 0, 1, ...)
///   continuity = ...
///   max_mood = 3
///   max_tokens = 64
struct PromptTables {
  std::string version;
  std::array<std::string, 5> role_phrase;
  std::array<std::string, 5> modifier;
  std::vector<std::string> variations;
  std::string continuity;
  std::size_t max_mood = 3;
  std::size_t max_tokens = 64;

  static const PromptTables& builtin();
  static PromptTables load(const std::string& path);
  static PromptTables parse(const std::string& text);
};

std::string section_modifier(SectionRole role, const PromptTables& tables = PromptTables::builtin());
/// Throws InvalidSectionIndex for k = 0.
std::string variation_tag(std::size_t k, const PromptTables& tables = PromptTables::builtin());

struct LockedStyle {
  std::string genre;
  double bpm = 0.0;
};

struct PromptPart {
  std::string label;
  std::string text;
};

struct PromptRecord {
  std::string text;
  std::vector<PromptPart> parts;
  std::size_t section_index = 0;
};

/// Builds the section prompt. For k = 0 without a lock the caption's own
/// genre is used; k > 0 requires `locked` (InvalidState otherwise).
PromptRecord build_prompt(const SceneCaption& caption, const InstrumentSelection& sel, std::size_t k,
                          const std::optional<LockedStyle>& locked,
                          const PromptTables& tables = PromptTables::builtin());

std::size_t count_tokens(std::string_view text);

}  // namespace framebeat
