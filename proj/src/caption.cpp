#include "framebeat/caption.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <chrono>
#include <fstream>
#include <sstream>

#include "framebeat/audio.hpp"
#include "framebeat/error.hpp"
#include "http_client.hpp"

namespace framebeat {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::uint16_t be16(const std::vector<std::uint8_t>& b, std::size_t i) {
  return static_cast<std::uint16_t>((b[i] << 8) | b[i + 1]);
}

bool is_sof(std::uint8_t marker) {
  return marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 && marker != 0xCC;
}

std::string strip_fences(const std::string& text) {
  std::string s = trim(text);
  if (s.rfind("```", 0) != 0) {
    // Prose around a fenced block: keep only the block.
    const auto open = s.find("```");
    if (open == std::string::npos) return s;
    s = s.substr(open);
  }
  const auto first_nl = s.find('\n');
  if (first_nl == std::string::npos) return trim(s.substr(3));
  s = s.substr(first_nl + 1);
  const auto close = s.rfind("```");
  if (close != std::string::npos) s = s.substr(0, close);
  return trim(s);
}

std::vector<std::string> string_list(const json& v) {
  std::vector<std::string> out;
  auto add = [&](const std::string& item) {
    std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  };
  if (v.is_string()) {
    std::stringstream ss(v.get<std::string>());
    std::string item;
    while (std::getline(ss, item, ',')) add(item);
  } else if (v.is_array()) {
    for (const auto& e : v) {
      if (e.is_string()) add(e.get<std::string>());
    }
  }
  return out;
}

const json* field(const json& j, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    auto it = j.find(n);
    if (it != j.end() && !it->is_null()) return &*it;
  }
  return nullptr;
}

std::optional<double> coerce_bpm(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) return std::nullopt;
  const std::string s = v.get<std::string>();
  const auto pos = s.find_first_of("0123456789.");
  if (pos == std::string::npos) return std::nullopt;
  try {
    return std::stod(s.substr(pos));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

CaptureFrame CaptureFrame::from_jpeg(std::vector<std::uint8_t> bytes, double captured_at) {
  if (bytes.size() < 4 || bytes[0] != 0xFF || bytes[1] != 0xD8 || bytes[2] != 0xFF) {
    throw Error(ErrorCode::InvalidFrame, "not a JPEG image");
  }
  std::size_t i = 2;
  while (i + 4 <= bytes.size()) {
    if (bytes[i] != 0xFF) throw Error(ErrorCode::InvalidFrame, "corrupt JPEG marker stream");
    const std::uint8_t marker = bytes[i + 1];
    if (marker == 0xFF) {
      ++i;
      continue;
    }
    if (marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) {
      i += 2;
      continue;
    }
    if (marker == 0xDA || marker == 0xD9) break;
    const std::size_t len = be16(bytes, i + 2);
    if (len < 2 || i + 2 + len > bytes.size()) break;
    if (is_sof(marker)) {
      if (len < 7) break;
      CaptureFrame frame;
      frame.height = be16(bytes, i + 5);
      frame.width = be16(bytes, i + 7);
      if (frame.width <= 0 || frame.height <= 0) throw Error(ErrorCode::InvalidFrame, "JPEG has zero dimensions");
      frame.image_bytes = std::move(bytes);
      frame.captured_at = captured_at;
      return frame;
    }
    i += 2 + len;
  }
  throw Error(ErrorCode::InvalidFrame, "JPEG frame header not found");
}

std::uint64_t CaptureFrame::hash() const { return fnv1a64(image_bytes); }

json to_json(const SceneCaption& c) {
  json j{{"description", c.description},
         {"objects", c.objects},
         {"mood", c.mood},
         {"section_role", to_string(c.section_role)},
         {"genre", c.genre}};
  j["bpm"] = c.bpm ? json(*c.bpm) : json(nullptr);
  if (!c.warnings.empty()) j["warnings"] = c.warnings;
  return j;
}

SceneCaption caption_from_json(const json& j) { return parse_caption_json(j.dump()); }

SceneCaption parse_caption_json(const std::string& text) {
  json j;
  try {
    j = json::parse(strip_fences(text));
  } catch (const json::exception&) {
    throw Error(ErrorCode::MalformedCaption, "reply is not JSON");
  }
  if (!j.is_object()) throw Error(ErrorCode::MalformedCaption, "reply is not a JSON object");

  SceneCaption c;
  if (const json* v = field(j, {"description", "overall_description", "scene"}); v && v->is_string()) {
    c.description = trim(v->get<std::string>());
  }
  if (const json* v = field(j, {"objects", "salient_objects"})) c.objects = string_list(*v);
  if (const json* v = field(j, {"mood", "moods", "mood_adjectives"})) c.mood = string_list(*v);
  if (const json* v = field(j, {"genre", "musical_genre"}); v && v->is_string()) c.genre = trim(v->get<std::string>());

  const json* role = field(j, {"section_role", "role"});
  if (!role) {
    c.warnings.push_back("section_role missing, defaulted to verse");
  } else if (!role->is_string() || !parse_section_role(trim(role->get<std::string>()), c.section_role)) {
    c.section_role = SectionRole::Verse;
    c.warnings.push_back("section_role '" + (role->is_string() ? role->get<std::string>() : role->dump()) +
                         "' not recognised, defaulted to verse");
  }

  if (const json* v = field(j, {"bpm", "tempo"})) {
    c.bpm = coerce_bpm(*v);
    if (!c.bpm || !std::isfinite(*c.bpm)) {
      c.bpm.reset();
      c.warnings.push_back("bpm '" + v->dump() + "' is not a number, ignored");
    } else if (*c.bpm < 40.0 || *c.bpm > 240.0) {
      const double clamped = std::clamp(*c.bpm, 40.0, 240.0);
      std::ostringstream w;
      w << "bpm " << *c.bpm << " clamped to " << clamped;
      c.warnings.push_back(w.str());
      c.bpm = clamped;
    }
  }

  if (c.objects.empty() && c.description.empty()) {
    throw Error(ErrorCode::MalformedCaption, "caption has neither a description nor objects");
  }
  return c;
}

CaptionTemplates CaptionTemplates::builtin() {
  CaptionTemplates t;
  t.version = "builtin-1";
  t.instruction =
      "Describe this photo for a music generator. Reply with a JSON object with the keys "
      "description (one sentence about the overall scene), objects (array of salient objects), "
      "mood (array of adjectives), section_role (one of intro, verse, chorus, bridge, outro), "
      "genre (a musical genre that fits the scene) and bpm (a number).";
  t.strict_instruction = t.instruction + " Output only the JSON object, with no prose and no code fences.";
  return t;
}

CaptionTemplates CaptionTemplates::load(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
    CaptionTemplates t;
    t.version = j.at("version").get<std::string>();
    t.instruction = j.at("instruction").get<std::string>();
    t.strict_instruction = j.at("strict_instruction").get<std::string>();
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
}

MockCaptionBackend::MockCaptionBackend(std::unordered_map<std::uint64_t, Fixture> fixtures, SceneCaption fallback,
                                       double latency_seconds)
    : fixtures_(std::move(fixtures)), fallback_(std::move(fallback)), latency_(latency_seconds) {}

SceneCaption MockCaptionBackend::default_caption() {
  SceneCaption c;
  c.description = "an everyday scene";
  c.objects = {"scene"};
  c.mood = {"relaxed"};
  c.section_role = SectionRole::Verse;
  c.genre = "ambient";
  c.bpm = 100.0;
  return c;
}

MockCaptionBackend MockCaptionBackend::from_file(const std::string& path, double latency_seconds) {
  std::unordered_map<std::uint64_t, Fixture> fixtures;
  SceneCaption fallback = default_caption();
  try {
    const json j = json::parse(read_file(path));
    if (j.contains("default")) fallback = caption_from_json(j.at("default"));
    for (const auto& [key, entry] : j.at("fixtures").items()) {
      Fixture f;
      f.name = entry.value("name", key);
      f.caption = caption_from_json(entry.at("caption"));
      fixtures.emplace(std::stoull(key, nullptr, 16), std::move(f));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::ConfigError, path + ": fixture keys must be hex hashes");
  }
  return MockCaptionBackend(std::move(fixtures), std::move(fallback), latency_seconds);
}

const MockCaptionBackend::Fixture* MockCaptionBackend::find(std::uint64_t hash) const {
  auto it = fixtures_.find(hash);
  return it == fixtures_.end() ? nullptr : &it->second;
}

CaptionReply MockCaptionBackend::describe(const CaptureFrame& frame, const std::string&) {
  std::lock_guard lock(*mutex_);
  ++calls_;
  if (failures_ > 0) {
    --failures_;
    throw Error(ErrorCode::BackendUnavailable, "mock caption backend: injected failure");
  }
  if (!injected_.empty()) {
    std::string text = injected_.front();
    injected_.erase(injected_.begin());
    return {std::move(text), latency_};
  }
  const Fixture* f = find(frame.hash());
  SceneCaption c = f ? f->caption : fallback_;
  c.warnings.clear();
  return {to_json(c).dump(), latency_};
}

CaptionReply HttpCaptionBackend::describe(const CaptureFrame& frame, const std::string& instruction) {
  const std::string image(frame.image_bytes.begin(), frame.image_bytes.end());
  json body{{"model", options_.model},
            {"max_tokens", 400},
            {"messages",
             json::array({{{"role", "user"},
                           {"content",
                            json::array({{{"type", "text"}, {"text", instruction}},
                                         {{"type", "image_url"},
                                          {"image_url", {{"url", "data:image/jpeg;base64," + detail::base64(image)}}}}})}}})}};
  std::vector<std::pair<std::string, std::string>> headers;
  if (!options_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + options_.api_key);
  const auto started = std::chrono::steady_clock::now();
  const auto res = detail::http_post(options_.url, body.dump(), "application/json", headers, options_.timeout_seconds);
  const double latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (res.status < 200 || res.status >= 300) {
    throw Error(ErrorCode::BackendUnavailable, "caption service returned HTTP " + std::to_string(res.status));
  }
  try {
    const json reply = json::parse(res.body);
    return {reply.at("choices").at(0).at("message").at("content").get<std::string>(), latency};
  } catch (const json::exception&) {
    // Let the caption parser decide what to do with an unexpected envelope.
    return {res.body, latency};
  }
}

CaptionOutcome caption(const CaptureFrame& frame, CaptionBackend& backend, const CaptionTemplates& templates,
                       const CaptionOptions& options) {
  if (frame.image_bytes.empty() || frame.width <= 0 || frame.height <= 0) {
    throw Error(ErrorCode::InvalidFrame, "capture frame is empty");
  }
  CaptionOutcome out;
  auto ask = [&](const std::string& instruction) {
    const CaptionReply reply = backend.describe(frame, instruction);
    ++out.calls;
    out.latency_seconds += reply.latency_seconds;
    if (reply.latency_seconds > options.timeout_seconds) {
      throw Error(ErrorCode::BackendUnavailable, "caption backend timed out");
    }
    return reply.text;
  };
  try {
    out.caption = parse_caption_json(ask(templates.instruction));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MalformedCaption) throw;
    out.caption = parse_caption_json(ask(templates.strict_instruction));
  }
  return out;
}

}  // namespace framebeat
