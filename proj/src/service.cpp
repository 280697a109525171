#include "framebeat/service.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include <httplib.h>

#include "framebeat/error.hpp"

namespace framebeat {

using nlohmann::json;

struct ServiceApp::Session {
  BackendSet backends;
  std::unique_ptr<Orchestrator> orch;
};

ApiResponse ApiResponse::json(int status, const nlohmann::json& body) {
  return {status, body.dump(), "application/json"};
}

ApiResponse ApiResponse::error(int status, const std::string& code, const std::string& message) {
  return json(status, {{"error", code}, {"message", message}});
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InstrumentCapViolation:
    case ErrorCode::InvalidFrame:
    case ErrorCode::MalformedContainer:
    case ErrorCode::UnsupportedEncoding:
    case ErrorCode::ConfigError:
    case ErrorCode::ProtocolError:
    case ErrorCode::InvalidEnvelope:
    case ErrorCode::WindowOutOfRange:
      return 400;
    case ErrorCode::BackPressure:
    case ErrorCode::InvalidState:
    case ErrorCode::TooFewSections:
    case ErrorCode::SessionNotActive:
    case ErrorCode::InvalidTransition:
    case ErrorCode::SwapSuperseded:
      return 409;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::UploadFailed:
    case ErrorCode::JobFailed:
      return 502;
    case ErrorCode::Timeout:
      return 504;
    default:
      return 500;
  }
}

namespace {

ApiResponse from_error(const Error& e) {
  return ApiResponse::error(http_status(e.code()), std::string(to_string(e.code())), e.what());
}

std::string query(const ApiRequest& r, const std::string& key, const std::string& fallback = "") {
  auto it = r.query.find(key);
  return it == r.query.end() ? fallback : it->second;
}

const ApiPart* part(const ApiRequest& r, const std::string& name) {
  for (const auto& p : r.parts) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::int64_t to_int(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(what);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigError, std::string("bad ") + what + " '" + text + "'");
  }
}

std::string events_ndjson(const std::vector<SessionEvent>& events) {
  std::string out;
  for (const auto& e : events) out += to_json(e).dump() + "\n";
  return out;
}

CaptureFrame frame_from(const ApiPart& p) {
  return CaptureFrame::from_jpeg(std::vector<std::uint8_t>(p.content.begin(), p.content.end()));
}

}  // namespace

ServiceApp::ServiceApp(AppConfig config, Runtime& runtime) : config_(std::move(config)), runtime_(runtime) {}

ServiceApp::~ServiceApp() {
  stop_audio();
  // Sessions hold callbacks posted on the runtime; drain them on the owner.
  runtime_.invoke([this] {
    if (session_) session_->orch->stop();
  });
}

std::shared_ptr<ServiceApp::Session> ServiceApp::current() const {
  std::lock_guard lock(mutex_);
  return session_;
}

bool ServiceApp::has_session() const { return current() != nullptr; }

json ServiceApp::create_session() {
  json snap;
  runtime_.invoke([&] {
    auto s = std::make_shared<Session>();
    s->backends = BackendSet::build(config_, runtime_);
    s->orch = std::make_unique<Orchestrator>(runtime_, s->backends.view(), config_.session_config());
    s->orch->start();
    std::lock_guard lock(mutex_);
    if (session_) {
      session_->orch->stop();
      retired_.push_back(session_);
    }
    session_ = s;
    snap = s->orch->snapshot(level_.load());
  });
  return snap;
}

std::shared_ptr<ServiceApp::Session> ServiceApp::ensure_session() {
  if (auto s = current()) return s;
  create_session();
  return current();
}

void ServiceApp::with_session(const std::function<void(Orchestrator&)>& fn) {
  auto s = current();
  if (!s) throw Error(ErrorCode::SessionNotActive, "no session");
  runtime_.invoke([&] { fn(*s->orch); });
}

std::shared_ptr<const EventLog> ServiceApp::event_log() const {
  auto s = current();
  if (!s) return nullptr;
  return std::shared_ptr<const EventLog>(s, &s->orch->events());
}

ApiResponse ServiceApp::handle(const ApiRequest& r) {
  try {
    if (r.method == "GET" && r.path == "/health") return ApiResponse::json(200, {{"ok", true}});
    if (r.method == "POST" && r.path == "/session") return ApiResponse::json(201, create_session());
    if (r.method == "POST" && r.path == "/capture") return capture(r);
    if (r.method == "POST" && r.path == "/frame") {
      const ApiPart* image = part(r, "image");
      if (!image) return ApiResponse::error(400, "InvalidFrame", "multipart field 'image' is required");
      CaptureFrame frame = frame_from(*image);
      std::lock_guard lock(mutex_);
      camera_frame_ = std::move(frame);
      return ApiResponse::json(200, {{"ok", true}});
    }
    if (r.method == "POST" && r.path == "/webhooks/mix") {
      const json body = json::parse(r.body);
      const std::string task = body.at("task_id").get<std::string>();
      with_session([&](Orchestrator& o) { o.mixer().receive_webhook(task); });
      return ApiResponse::json(200, {{"ok", true}});
    }
    auto s = current();
    if (!s) return ApiResponse::error(404, "SessionNotActive", "no session; POST /session or /capture first");
    if (r.method == "GET" && r.path == "/state") {
      json snap;
      runtime_.invoke([&] { snap = s->orch->snapshot(level_.load()); });
      return ApiResponse::json(200, snap);
    }
    if (r.method == "GET" && r.path == "/events") return events_response(r);
    if (r.method == "POST" && r.path == "/control") return control(r);
    if (r.method == "GET" && r.path == "/audio") return audio_chunk(r);
    if (r.method == "GET" && r.path == "/jobs") {
      json jobs = json::array();
      runtime_.invoke([&] {
        for (const MixJob* j : s->orch->mixer().jobs()) jobs.push_back(job_summary(*j));
      });
      return ApiResponse::json(200, jobs);
    }
    if (r.method == "GET" && r.path == "/report") {
      json report;
      runtime_.invoke([&] { report = s->orch->latency_report().to_json(); });
      return ApiResponse::json(200, report);
    }
    if (r.method == "GET" && r.path == "/display") return {200, display_line(), "text/plain"};
    return ApiResponse::error(404, "NotFound", r.method + " " + r.path);
  } catch (const Error& e) {
    return from_error(e);
  } catch (const json::exception& e) {
    return ApiResponse::error(400, "BadRequest", e.what());
  }
}

ApiResponse ServiceApp::capture(const ApiRequest& r) {
  const ApiPart* image = part(r, "image");
  if (!image) return ApiResponse::error(400, "InvalidFrame", "multipart field 'image' is required");
  CaptureFrame frame = frame_from(*image);
  std::optional<InstrumentSelection> sel;
  std::vector<std::string> names;
  for (const auto& p : r.parts) {
    if (p.name == "instruments" || p.name == "instruments[]") {
      std::stringstream ss(p.content);
      std::string item;
      while (std::getline(ss, item, ',')) names.push_back(item);
    }
  }
  if (part(r, "instruments") || part(r, "instruments[]")) sel = InstrumentSelection::parse(names);
  auto s = ensure_session();
  CaptureHandle handle;
  runtime_.invoke([&] {
    handle = sel ? s->orch->handle_capture(std::move(frame), *sel) : s->orch->handle_capture(std::move(frame));
  });
  return ApiResponse::json(202, {{"capture_index", handle.capture_index},
                                 {"frame_hash", hex64(handle.frame_hash)},
                                 {"state", "/state"},
                                 {"events", "/events?since=0"}});
}

ApiResponse ServiceApp::events_response(const ApiRequest& r) {
  const auto since = static_cast<std::uint64_t>(std::max<std::int64_t>(0, to_int(query(r, "since", "0"), "since")));
  auto log = event_log();
  return {200, events_ndjson(log->since(since)), "application/x-ndjson"};
}

ApiResponse ServiceApp::control(const ApiRequest& r) {
  const json body = json::parse(r.body.empty() ? "{}" : r.body);
  const std::string action = body.value("action", "");
  auto s = current();
  if (action == "auto_mix") {
    const bool enabled = body.at("enabled").get<bool>();
    runtime_.invoke([&] { s->orch->set_auto_mix(enabled); });
    return ApiResponse::json(200, {{"ok", true}, {"auto_mix", enabled}});
  }
  if (action == "select_instruments") {
    const auto sel = InstrumentSelection::parse(body.at("instruments").get<std::vector<std::string>>());
    runtime_.invoke([&] { s->orch->select_instruments(sel); });
    return ApiResponse::json(200, {{"ok", true}, {"instruments", sel.names()}});
  }
  if (action == "master") {
    json job;
    runtime_.invoke([&] { job = job_summary(s->orch->request_master()); });
    return ApiResponse::json(202, job);
  }
  if (action == "export") {
    std::shared_ptr<const Program> program;
    runtime_.invoke([&] {
      if (s->orch->engine().sections().empty()) throw Error(ErrorCode::InvalidState, "nothing to export yet");
      program = s->orch->engine().snapshot();
    });
    // Rendering happens off the owner; the snapshot is immutable.
    const AudioBuffer audio = program->render(0, static_cast<std::size_t>(program->end_sample()));
    const auto wav = encode_wav(audio);
    return {200, std::string(wav.begin(), wav.end()), "audio/wav"};
  }
  return ApiResponse::error(400, "BadRequest", "unknown control action '" + action + "'");
}

ApiResponse ServiceApp::audio_chunk(const ApiRequest& r) {
  auto s = current();
  std::shared_ptr<const Program> program;
  std::int64_t playhead = 0;
  runtime_.invoke([&] {
    program = s->orch->engine().snapshot();
    playhead = s->orch->engine().playhead();
  });
  const std::int64_t start = to_int(query(r, "start", std::to_string(playhead)), "start");
  const std::int64_t frames = to_int(query(r, "frames", std::to_string(kSampleRate)), "frames");
  if (start < 0 || frames <= 0 || frames > 10 * kSampleRate) {
    return ApiResponse::error(400, "WindowOutOfRange", "chunks are 1 frame to 10 s from a nonnegative start");
  }
  const auto wav = encode_wav(program->render(start, static_cast<std::size_t>(frames)));
  return {200, std::string(wav.begin(), wav.end()), "audio/wav"};
}

void ServiceApp::start_audio(std::size_t block_frames) {
  if (audio_running_.exchange(true)) return;
  audio_thread_ = std::thread([this, block_frames] {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration<double>(static_cast<double>(block_frames) / kSampleRate);
    auto deadline = clock::now();
    std::vector<float> l(block_frames);
    std::vector<float> r(block_frames);
    std::uint64_t blocks = 0;
    while (audio_running_.load()) {
      if (auto s = current()) {
        s->orch->engine().render(l, r);
        double sum = 0.0;
        for (std::size_t i = 0; i < block_frames; ++i) sum += double(l[i]) * l[i] + double(r[i]) * r[i];
        level_.store(level_from_rms(std::sqrt(sum / (2.0 * static_cast<double>(block_frames)))));
        if (++blocks % 8 == 0) {
          std::weak_ptr<Session> weak = s;
          runtime_.post([weak] {
            if (auto live = weak.lock()) live->orch->tick();
          });
        }
      }
      deadline += std::chrono::duration_cast<clock::duration>(period);
      std::this_thread::sleep_until(deadline);
    }
  });
}

void ServiceApp::stop_audio() {
  if (!audio_running_.exchange(false)) return;
  if (audio_thread_.joinable()) audio_thread_.join();
}

std::string ServiceApp::display_line() {
  auto s = current();
  if (!s) return encode_display(DisplayState{});
  std::string line;
  runtime_.invoke([&] { line = encode_display(s->orch->display_state(level_.load())); });
  return line;
}

std::string ServiceApp::device_line(const std::string& line) {
  const DeviceMessage msg = parse_line(line);
  const auto* event = std::get_if<DeviceEvent>(&msg);
  if (!event || event->kind != EdgeKind::Down) return display_line();
  auto s = ensure_session();
  runtime_.invoke([&] {
    if (event->button == Button::Capture) {
      std::optional<CaptureFrame> frame;
      {
        std::lock_guard lock(mutex_);
        frame = camera_frame_;
      }
      if (!frame) return;  // no camera frame yet; nothing to capture
      try {
        s->orch->handle_capture(std::move(*frame));
      } catch (const Error&) {
        // back-pressure or a stopped session: the press is dropped
      }
      return;
    }
    s->orch->toggle_instrument(static_cast<Instrument>(static_cast<int>(event->button)));
  });
  return display_line();
}

// ---------------------------------------------------------------------------
// HTTP binding

struct HttpServer::Impl {
  ServiceApp& app;
  httplib::Server server;
  std::thread thread;
  explicit Impl(ServiceApp& a) : app(a) {}
};

namespace {

ApiRequest to_api(const httplib::Request& req) {
  ApiRequest r;
  r.method = req.method;
  r.path = req.path;
  for (const auto& [k, v] : req.params) r.query[k] = v;
  r.body = req.body;
  r.content_type = req.get_header_value("Content-Type");
  for (const auto& [name, file] : req.files) r.parts.push_back({name, file.filename, file.content_type, file.content});
  return r;
}

void send(httplib::Response& res, const ApiResponse& api) {
  res.status = api.status;
  res.set_content(api.body, api.content_type);
}

}  // namespace

HttpServer::HttpServer(ServiceApp& app) : impl_(std::make_unique<Impl>(app)) {
  auto& srv = impl_->server;
  ServiceApp* a = &app;
  auto forward = [a](const httplib::Request& req, httplib::Response& res) { send(res, a->handle(to_api(req))); };
  for (const char* path : {"/health", "/state", "/jobs", "/report", "/display", "/audio"}) srv.Get(path, forward);
  for (const char* path : {"/session", "/capture", "/frame", "/control", "/webhooks/mix"}) srv.Post(path, forward);
  srv.Get("/events", [a](const httplib::Request& req, httplib::Response& res) {
    const ApiRequest api = to_api(req);
    if (!a->has_session()) {
      send(res, ApiResponse::error(404, "SessionNotActive", "no session"));
      return;
    }
    if (req.get_param_value("follow") != "1") {
      send(res, a->handle(api));
      return;
    }
    std::uint64_t cursor = 0;
    try {
      cursor = std::stoull(req.get_param_value("since").empty() ? "0" : req.get_param_value("since"));
    } catch (const std::exception&) {
      send(res, ApiResponse::error(400, "BadRequest", "bad since"));
      return;
    }
    auto log = a->event_log();
    res.set_chunked_content_provider("application/x-ndjson", [log, cursor](std::size_t, httplib::DataSink& sink) mutable {
      log->wait_for(cursor, std::chrono::milliseconds(500));
      const auto events = log->since(cursor);
      if (events.empty()) {
        // keep-alive line so dead clients are noticed
        return sink.write("\n", 1);
      }
      std::string chunk;
      for (const auto& e : events) chunk += to_json(e).dump() + "\n";
      cursor = events.back().seq;
      return sink.write(chunk.data(), chunk.size());
    });
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(ErrorCode::IoError, "cannot listen on " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void HttpServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace framebeat
