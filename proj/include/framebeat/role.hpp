#pragma once

#include <string>
#include <string_view>

namespace framebeat {

enum class SectionRole { Intro, Verse, Chorus, Bridge, Outro };

std::string to_string(SectionRole role);
/// Case-insensitive; returns false for anything outside the five roles.
bool parse_section_role(std::string_view text, SectionRole& out);

}  // namespace framebeat
