#include "framebeat/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "framebeat/error.hpp"

namespace framebeat {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string bare(std::string_view word) {
  std::string w = lower(word);
  while (!w.empty() && std::ispunct(static_cast<unsigned char>(w.back()))) w.pop_back();
  while (!w.empty() && std::ispunct(static_cast<unsigned char>(w.front()))) w.erase(w.begin());
  return w;
}

bool is_instrument_word(const std::string& w, const InstrumentSelection& keep) {
  static const std::vector<std::pair<std::string, Instrument>> vocabulary{
      {"keys", Instrument::Keys},         {"piano", Instrument::Keys},       {"keyboard", Instrument::Keys},
      {"synth", Instrument::Keys},        {"guitar", Instrument::Guitar},    {"guitars", Instrument::Guitar},
      {"bass", Instrument::Bass},         {"bassline", Instrument::Bass},    {"percussion", Instrument::Percussion},
      {"drums", Instrument::Percussion},  {"drum", Instrument::Percussion},
  };
  for (const auto& [word, instrument] : vocabulary) {
    if (w == word) return !keep.contains(instrument);
  }
  return false;
}

/// Drops words naming instruments outside the selection.
std::string scrub(const std::string& text, const InstrumentSelection& keep) {
  std::vector<std::string> kept;
  for (const auto& w : words(text)) {
    if (!is_instrument_word(bare(w), keep)) kept.push_back(w);
  }
  return join(kept, " ");
}

std::size_t role_slot(SectionRole role) { return static_cast<std::size_t>(role); }

std::string scene_phrase(const SceneCaption& caption, const InstrumentSelection& sel) {
  std::string description = trim(caption.description);
  while (!description.empty() && (description.back() == '.' || description.back() == ',')) description.pop_back();
  description = scrub(description, sel);
  std::string object = caption.objects.empty() ? std::string() : scrub(trim(caption.objects.front()), sel);
  if (description.empty()) return object;
  if (object.empty()) return description;
  std::set<std::string> present;
  for (const auto& w : words(description)) present.insert(bare(w));
  const auto object_words = words(object);
  const bool covered = std::all_of(object_words.begin(), object_words.end(),
                                   [&](const std::string& w) { return present.count(bare(w)) > 0; });
  return covered ? description : description + " with " + object;
}

}  // namespace

std::string to_string(Instrument instrument) {
  switch (instrument) {
    case Instrument::Keys: return "keys";
    case Instrument::Guitar: return "guitar";
    case Instrument::Bass: return "bass";
    case Instrument::Percussion: return "percussion";
  }
  return "keys";
}

bool parse_instrument(std::string_view text, Instrument& out) {
  const std::string t = lower(trim(text));
  for (Instrument i : kAllInstruments) {
    if (t == to_string(i)) {
      out = i;
      return true;
    }
  }
  return false;
}

InstrumentSelection InstrumentSelection::of(const std::vector<Instrument>& instruments) {
  if (instruments.empty() || instruments.size() > 3) {
    throw Error(ErrorCode::InstrumentCapViolation,
                "select 1 to 3 instruments, got " + std::to_string(instruments.size()));
  }
  InstrumentSelection sel;
  for (Instrument i : kAllInstruments) {
    const auto n = std::count(instruments.begin(), instruments.end(), i);
    if (n > 1) throw Error(ErrorCode::InstrumentCapViolation, to_string(i) + " selected twice");
    if (n == 1) sel.instruments_.push_back(i);
  }
  return sel;
}

InstrumentSelection InstrumentSelection::parse(const std::vector<std::string>& names) {
  std::vector<Instrument> out;
  for (const auto& n : names) {
    if (trim(n).empty()) continue;
    Instrument i;
    if (!parse_instrument(n, i)) throw Error(ErrorCode::InstrumentCapViolation, "unknown instrument '" + n + "'");
    out.push_back(i);
  }
  return of(out);
}

InstrumentSelection InstrumentSelection::parse(std::string_view comma_separated) {
  std::vector<std::string> names;
  std::stringstream ss{std::string(comma_separated)};
  std::string item;
  while (std::getline(ss, item, ',')) names.push_back(item);
  return parse(names);
}

bool InstrumentSelection::contains(Instrument i) const {
  return std::find(instruments_.begin(), instruments_.end(), i) != instruments_.end();
}

std::vector<std::string> InstrumentSelection::names() const {
  std::vector<std::string> out;
  for (Instrument i : instruments_) out.push_back(to_string(i));
  return out;
}

std::string InstrumentSelection::join(std::string_view sep) const { return framebeat::join(names(), sep); }

const PromptTables& PromptTables::builtin() {
  static const PromptTables tables = [] {
    PromptTables t;
    t.version = "builtin-1";
    t.role_phrase = {"intro section", "section", "chorus section", "bridge section", "outro section"};
    t.modifier = {"sparse, building anticipation", "steady groove", "higher energy, catchy hook",
                  "contrasting texture, tension", "winding down"};
    t.variations = {"subtle variation", "motif development", "steady groove", "new countermelody"};
    t.continuity = "same sound palette as previous section";
    return t;
  }();
  return tables;
}

PromptTables PromptTables::parse(const std::string& text) {
  PromptTables t = builtin();
  t.version.clear();
  std::vector<std::pair<std::size_t, std::string>> variations;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "prompt tables line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    SectionRole role;
    if (key == "version") {
      t.version = value;
    } else if (key == "continuity") {
      t.continuity = value;
    } else if (key == "max_mood") {
      t.max_mood = std::stoul(value);
    } else if (key == "max_tokens") {
      t.max_tokens = std::stoul(value);
    } else if (key.rfind("role_phrase.", 0) == 0 && parse_section_role(key.substr(12), role)) {
      t.role_phrase[role_slot(role)] = value;
    } else if (key.rfind("modifier.", 0) == 0 && parse_section_role(key.substr(9), role)) {
      t.modifier[role_slot(role)] = value;
    } else if (key.rfind("variation.", 0) == 0) {
      variations.emplace_back(std::stoul(key.substr(10)), value);
    } else {
      throw Error(ErrorCode::ConfigError, "prompt tables line " + std::to_string(lineno) + ": unknown key " + key);
    }
  }
  if (t.version.empty()) throw Error(ErrorCode::ConfigError, "prompt tables need a version");
  if (!variations.empty()) {
    std::sort(variations.begin(), variations.end());
    t.variations.clear();
    for (std::size_t i = 0; i < variations.size(); ++i) {
      if (variations[i].first != i) throw Error(ErrorCode::ConfigError, "variation indices must be 0..n-1");
      t.variations.push_back(variations[i].second);
    }
  }
  return t;
}

PromptTables PromptTables::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string section_modifier(SectionRole role, const PromptTables& tables) { return tables.modifier[role_slot(role)]; }

std::string variation_tag(std::size_t k, const PromptTables& tables) {
  if (k == 0) throw Error(ErrorCode::InvalidSectionIndex, "the first section carries no variation tag");
  return tables.variations[(k - 1) % tables.variations.size()];
}

std::size_t count_tokens(std::string_view text) { return words(text).size(); }

PromptRecord build_prompt(const SceneCaption& caption, const InstrumentSelection& sel, std::size_t k,
                          const std::optional<LockedStyle>& locked, const PromptTables& tables) {
  if (sel.empty() || sel.instruments().size() > 3) {
    throw Error(ErrorCode::InstrumentCapViolation, "select 1 to 3 instruments");
  }
  if (k > 0 && !locked) throw Error(ErrorCode::InvalidState, "sections after the first need the locked style");
  const std::string genre = locked ? locked->genre : trim(caption.genre);

  PromptRecord rec;
  rec.section_index = k;
  rec.parts.push_back({"instruments", sel.join(", ") + " " + tables.role_phrase[role_slot(caption.section_role)]});
  const std::string scene = scene_phrase(caption, sel);
  if (!scene.empty()) rec.parts.push_back({"scene", scene});
  std::vector<std::string> moods;
  for (const auto& m : caption.mood) {
    const std::string s = scrub(trim(m), sel);
    if (s.empty() || std::find(moods.begin(), moods.end(), s) != moods.end()) continue;
    if (moods.size() == tables.max_mood) break;
    moods.push_back(s);
  }
  for (const auto& m : moods) rec.parts.push_back({"mood", m});
  if (!genre.empty()) rec.parts.push_back({"genre", genre});
  rec.parts.push_back({"modifier", section_modifier(caption.section_role, tables)});
  if (k > 0) {
    rec.parts.push_back({"variation", variation_tag(k, tables)});
    rec.parts.push_back({"continuity", tables.continuity});
  }

  auto render = [&] {
    std::vector<std::string> texts;
    for (const auto& p : rec.parts) texts.push_back(p.text);
    return join(texts, ", ");
  };
  rec.text = render();
  // Over budget: shorten the scene first, then drop moods from the end.
  auto scene_it = [&] {
    return std::find_if(rec.parts.begin(), rec.parts.end(), [](const PromptPart& p) { return p.label == "scene"; });
  };
  while (count_tokens(rec.text) > tables.max_tokens) {
    auto it = scene_it();
    if (it != rec.parts.end()) {
      auto w = words(it->text);
      if (w.size() <= 1) {
        rec.parts.erase(it);
      } else {
        w.pop_back();
        it->text = join(w, " ");
      }
    } else {
      auto mood = std::find_if(rec.parts.rbegin(), rec.parts.rend(),
                               [](const PromptPart& p) { return p.label == "mood"; });
      if (mood == rec.parts.rend()) break;
      rec.parts.erase(std::next(mood).base());
    }
    rec.text = render();
  }
  return rec;
}

}  // namespace framebeat
