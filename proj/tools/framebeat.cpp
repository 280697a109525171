#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "framebeat/compose.hpp"
#include "framebeat/error.hpp"
#include "framebeat/service.hpp"

using namespace framebeat;

namespace {

std::atomic<HttpServer*> g_server{nullptr};

void on_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

AppConfig load_config(const std::string& path) {
  AppConfig c = path.empty() ? AppConfig::defaults() : AppConfig::load(path);
  c.apply_env();
  return c;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

int cmd_run(const std::string& config_path, std::string host, int port, bool audio) {
  AppConfig config = load_config(config_path);
  if (host.empty()) host = config.raw["server"].value("host", "127.0.0.1");
  if (port < 0) port = static_cast<int>(config.raw["server"].value("port", 8080.0));
  ThreadRuntime runtime;
  ServiceApp app(config, runtime);
  HttpServer server(app);
  const int bound = server.start(host, port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  if (audio) app.start_audio();
  std::cerr << "listening on http://" << host << ":" << bound << "\n";
  server.wait();
  g_server = nullptr;
  app.stop_audio();
  return 0;
}

struct ComposeArgs {
  std::string config;
  std::vector<std::string> images;
  std::string instruments = "keys";
  std::string out = "session.wav";
  std::string log;
  bool zero_latency = false;
  bool auto_mix = false;
  bool master = false;
};

int cmd_compose(const ComposeArgs& a) {
  AppConfig config = load_config(a.config);
  if (a.zero_latency) config.zero_latency();
  ComposeOptions options;
  options.frames = load_frames(a.images);
  options.instruments = InstrumentSelection::parse(a.instruments);
  options.auto_mix = a.auto_mix;
  options.master = a.master;
  const ComposeResult r = compose(config, options);
  write_file(a.out, encode_wav(r.audio));
  if (!a.log.empty()) {
    std::ofstream log(a.log);
    if (!log) throw Error(ErrorCode::IoError, "cannot write " + a.log);
    log << r.log_jsonl();
  }
  for (const auto& s : r.state["sections"]) {
    std::cout << "section " << s["index"] << " " << s["role"].get<std::string>() << " at "
              << s["start_seconds"].get<double>() << " s, " << s["bar_count"] << " bars, "
              << s["crossfade"].get<std::string>() << "\n  " << s["prompt"].get<std::string>() << "\n";
  }
  for (const auto& c : r.state["captures"]) {
    std::cout << "capture " << c["capture_index"] << " " << c["state"].get<std::string>();
    if (c.contains("error")) std::cout << ": " << c["error"].get<std::string>();
    std::cout << "\n";
  }
  std::cout << r.report.to_json().dump(2) << "\n";
  std::cout << "wrote " << a.out << " (" << r.audio.duration_seconds() << " s)\n";
  return 0;
}

int cmd_render(const std::string& log, const std::string& out) {
  const AudioBuffer audio = replay_render(RecordedSession::load(log));
  write_file(out, encode_wav(audio));
  std::cout << "wrote " << out << " (" << audio.duration_seconds() << " s, fingerprint " << hex64(fingerprint(audio))
            << ")\n";
  return 0;
}

std::vector<RawEdge> read_edges(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::vector<RawEdge> edges;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    int button = 0;
    int level = 0;
    std::uint32_t ms = 0;
    if (!(ss >> button >> level >> ms) || button < 0 || button >= kButtonCount) {
      throw Error(ErrorCode::ConfigError, "bad edge line '" + line + "' (want: <button> <0|1> <ms>)");
    }
    edges.push_back({static_cast<Button>(button), level != 0, ms});
  }
  return edges;
}

std::vector<RawEdge> random_edges(std::size_t presses, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::vector<RawEdge> edges;
  std::uint32_t t = 500;
  for (std::size_t i = 0; i < presses; ++i) {
    const auto b = static_cast<Button>(rng() % kButtonCount);
    for (int k = 0, n = 1 + static_cast<int>(rng() % 4); k < n; ++k) {
      edges.push_back({b, k % 2 == 0, t});
      t += 1 + rng() % 6;
    }
    edges.push_back({b, true, t});
    t += 80 + rng() % 200;
    edges.push_back({b, false, t});
    t += 300 + rng() % 3000;
  }
  std::stable_sort(edges.begin(), edges.end(), [](const RawEdge& a, const RawEdge& b) { return a.at_ms < b.at_ms; });
  return edges;
}

struct DeviceArgs {
  std::string config;
  std::string edges;
  std::string image;
  std::size_t presses = 12;
  std::uint32_t seed = 1;
  bool zero_latency = false;
};

int cmd_simulate_device(const DeviceArgs& a) {
  AppConfig config = load_config(a.config);
  if (a.zero_latency) config.zero_latency();
  VirtualRuntime rt;
  ServiceApp app(config, rt);
  const std::string image = a.image.empty() ? config.data_path("fixtures/images/night_street.jpg") : a.image;
  std::ifstream in(image, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + image);
  ApiRequest frame;
  frame.method = "POST";
  frame.path = "/frame";
  frame.parts.push_back({"image", image, "image/jpeg", std::string(std::istreambuf_iterator<char>(in), {})});
  if (const auto r = app.handle(frame); r.status != 200) throw Error(ErrorCode::InvalidFrame, r.body);

  FirmwareSimulator sim;
  auto exchange = [&](const DeviceEvent& e) {
    rt.run_until(e.at_ms / 1000.0);
    const std::string out = encode_event(e);
    const std::string reply = app.device_line(out);
    std::cout << "> " << out << "< " << reply;
    sim.apply_display(std::get<DisplayState>(parse_line(reply)));
  };
  const auto edges = a.edges.empty() ? random_edges(a.presses, a.seed) : read_edges(a.edges);
  std::size_t raw = 0;
  std::size_t emitted = 0;
  for (const auto& edge : edges) {
    for (const auto& e : sim.flush(edge.at_ms)) exchange(e), ++emitted;
    ++raw;
    if (auto e = sim.feed(edge)) exchange(*e), ++emitted;
  }
  const std::uint32_t end_ms = edges.empty() ? 0 : edges.back().at_ms + FirmwareSimulator::kDebounceMs;
  for (const auto& e : sim.flush(end_ms)) exchange(e), ++emitted;
  rt.run_until_idle();
  std::cout << "< " << app.display_line();
  std::cout << raw << " raw edges, " << emitted << " debounced events\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"framebeat: photos in, looping music out"};
  cli.require_subcommand(1);

  std::string config;
  cli.add_option("--config", config, "JSON config file");

  std::string host;
  int port = -1;
  bool audio = false;
  auto* run = cli.add_subcommand("run", "serve the HTTP API");
  run->add_option("--host", host, "bind address");
  run->add_option("--port", port, "port (0 picks a free one)");
  run->add_flag("--audio", audio, "render the session in real time for the device level meter");

  ComposeArgs compose_args;
  auto* comp = cli.add_subcommand("compose", "compose a session from images offline");
  comp->add_option("--images", compose_args.images, "JPEG files, in capture order")->required()->expected(1, -1);
  comp->add_option("--instruments", compose_args.instruments, "1 to 3 of keys,guitar,bass,percussion");
  comp->add_option("-o,--out", compose_args.out, "output WAV");
  comp->add_option("--log", compose_args.log, "write the session event log");
  comp->add_flag("--zero-latency", compose_args.zero_latency, "mock backends answer instantly");
  comp->add_flag("--auto-mix", compose_args.auto_mix, "request preview mixes as sections arrive");
  comp->add_flag("--master", compose_args.master, "master the finished arrangement");

  std::string log;
  std::string out;
  auto* render = cli.add_subcommand("render", "re-render a session from its event log");
  render->add_option("--log", log, "session event log")->required();
  render->add_option("-o,--out", out, "output WAV")->required();

  DeviceArgs device_args;
  auto* device = cli.add_subcommand("simulate-device", "drive a session from a simulated controller");
  device->add_option("--edges", device_args.edges, "raw switch edges, one '<button> <0|1> <ms>' per line");
  device->add_option("--presses", device_args.presses, "random presses when no edge file is given");
  device->add_option("--seed", device_args.seed, "random seed");
  device->add_option("--image", device_args.image, "camera frame used by the capture button");
  device->add_flag("--zero-latency", device_args.zero_latency, "mock backends answer instantly");

  CLI11_PARSE(cli, argc, argv);
  try {
    if (*run) return cmd_run(config, host, port, audio);
    if (*comp) {
      compose_args.config = config;
      return cmd_compose(compose_args);
    }
    if (*render) return cmd_render(log, out);
    device_args.config = config;
    return cmd_simulate_device(device_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
