#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "framebeat/config.hpp"
#include "framebeat/error.hpp"
#include "framebeat/session.hpp"

namespace framebeat {

struct ApiPart {
  std::string name;
  std::string filename;
  std::string content_type;
  std::string content;
};

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
  std::string content_type;
  std::vector<ApiPart> parts;  // multipart form fields and files
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";

  static ApiResponse json(int status, const nlohmann::json& body);
  static ApiResponse error(int status, const std::string& code, const std::string& message);
};

/// HTTP status for a library error.
int http_status(ErrorCode code);

/// The HTTP/event boundary. One session per process; it is created on
/// POST /session or on the first capture. Every session mutation runs on the
/// runtime owner through Runtime::invoke; handlers only forward.
///
///   POST /session                      new session
///   POST /capture   multipart          image (JPEG file) + instruments ("keys,guitar")
///   POST /frame     multipart          latest camera frame for the device capture button
///   GET  /state                        state snapshot
///   GET  /events?since=N[&follow=1]    line-delimited events after seq N
///   POST /control   JSON               {"action": "auto_mix", "enabled": true}
///                                      {"action": "select_instruments", "instruments": [...]}
///                                      {"action": "master"}
///                                      {"action": "export"}  -> audio/wav
///   GET  /audio?start=S&frames=N       rendered chunk as WAV
///   GET  /jobs, GET /report, GET /display, GET /health
///   POST /webhooks/mix  JSON           {"task_id": "..."}
class ServiceApp {
 public:
  ServiceApp(AppConfig config, Runtime& runtime);
  ~ServiceApp();
  ServiceApp(const ServiceApp&) = delete;
  ServiceApp& operator=(const ServiceApp&) = delete;

  ApiResponse handle(const ApiRequest& request);

  /// Creates a fresh session; the previous one stops.
  nlohmann::json create_session();
  bool has_session() const;
  /// Runs `fn` against the current session's orchestrator on the owner.
  void with_session(const std::function<void(Orchestrator&)>& fn);
  std::shared_ptr<const EventLog> event_log() const;

  /// Real-time monitor: renders blocks at the audio rate on its own thread
  /// and posts tick() to the owner.
  void start_audio(std::size_t block_frames = 512);
  void stop_audio();
  int audio_level() const noexcept { return level_.load(); }

  /// Controller input: one protocol line in, display line(s) out.
  std::string device_line(const std::string& line);
  std::string display_line();

  const AppConfig& config() const noexcept { return config_; }

 private:
  struct Session;
  std::shared_ptr<Session> current() const;
  std::shared_ptr<Session> ensure_session();
  ApiResponse events_response(const ApiRequest& request);
  ApiResponse capture(const ApiRequest& request);
  ApiResponse control(const ApiRequest& request);
  ApiResponse audio_chunk(const ApiRequest& request);

  AppConfig config_;
  Runtime& runtime_;
  mutable std::mutex mutex_;
  std::shared_ptr<Session> session_;
  std::vector<std::shared_ptr<Session>> retired_;
  std::optional<CaptureFrame> camera_frame_;
  std::atomic<int> level_{0};
  std::atomic<bool> audio_running_{false};
  std::thread audio_thread_;
};

/// Binds a ServiceApp to an HTTP listener on a background thread.
class HttpServer {
 public:
  explicit HttpServer(ServiceApp& app);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Returns the bound port (pass 0 for an ephemeral one).
  int start(const std::string& host, int port);
  void stop();
  /// Blocks until stop() is called from elsewhere.
  void wait();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace framebeat
