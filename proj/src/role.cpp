#include "framebeat/role.hpp"

#include <cctype>

namespace framebeat {

std::string to_string(SectionRole role) {
  switch (role) {
    case SectionRole::Intro: return "intro";
    case SectionRole::Verse: return "verse";
    case SectionRole::Chorus: return "chorus";
    case SectionRole::Bridge: return "bridge";
    case SectionRole::Outro: return "outro";
  }
  return "verse";
}

bool parse_section_role(std::string_view text, SectionRole& out) {
  std::string lower;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  static constexpr SectionRole kAll[] = {SectionRole::Intro, SectionRole::Verse, SectionRole::Chorus,
                                         SectionRole::Bridge, SectionRole::Outro};
  for (auto r : kAll) {
    if (lower == to_string(r)) {
      out = r;
      return true;
    }
  }
  return false;
}

}  // namespace framebeat
