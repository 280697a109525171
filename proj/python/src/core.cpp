#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "framebeat/compose.hpp"
#include "framebeat/crossfade.hpp"
#include "framebeat/device.hpp"
#include "framebeat/error.hpp"
#include "framebeat/prompt.hpp"
#include "framebeat/service.hpp"

namespace py = pybind11;
using namespace framebeat;
using nlohmann::json;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

AudioBuffer to_buffer(const Array& a) {
  if (a.ndim() != 2 || a.shape(0) != 2) throw Error(ErrorCode::InvalidState, "audio must be a (2, frames) array");
  const auto frames = static_cast<std::size_t>(a.shape(1));
  const float* p = a.data();
  return AudioBuffer(std::vector<float>(p, p + frames), std::vector<float>(p + frames, p + 2 * frames));
}

Array to_array(const AudioBuffer& b) {
  Array a({py::ssize_t{2}, static_cast<py::ssize_t>(b.frames())});
  float* p = a.mutable_data();
  for (int c = 0; c < kChannels; ++c) std::copy(b.channel(c).begin(), b.channel(c).end(), p + c * b.frames());
  return a;
}

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

EnvelopeFamily family_of(std::optional<double> alpha) {
  return alpha ? EnvelopeFamily::power_law(*alpha) : EnvelopeFamily::equal_power();
}

AppConfig make_config(const std::optional<std::string>& config_json, const std::optional<std::string>& data_dir,
                      bool zero_latency) {
  AppConfig c = AppConfig::defaults();
  if (config_json) {
    try {
      c.raw.merge_patch(json::parse(*config_json));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigError, e.what());
    }
  }
  if (data_dir) c.raw["data_dir"] = *data_dir;
  if (zero_latency) c.zero_latency();
  return c;
}

class PyService {
 public:
  PyService(const AppConfig& config) : runtime_(), app_(config, runtime_), server_(app_) {}
  ~PyService() { stop(); }

  int start(const std::string& host, int port) {
    py::gil_scoped_release release;
    started_ = true;
    return server_.start(host, port);
  }
  void stop() {
    py::gil_scoped_release release;
    if (started_) server_.stop();
    started_ = false;
  }
  py::tuple handle(const std::string& method, const std::string& path, const std::map<std::string, std::string>& query,
                   const std::string& body) {
    ApiRequest r;
    r.method = method;
    r.path = path;
    r.query = query;
    r.body = body;
    r.content_type = "application/json";
    ApiResponse res;
    {
      py::gil_scoped_release release;
      res = app_.handle(r);
    }
    return py::make_tuple(res.status, res.content_type, py::bytes(res.body));
  }
  std::string device_line(const std::string& line) {
    py::gil_scoped_release release;
    return app_.device_line(line);
  }

 private:
  ThreadRuntime runtime_;
  ServiceApp app_;
  HttpServer server_;
  bool started_ = false;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object args = py::make_tuple(std::string(to_string(e.code())), e.what());
      PyErr_SetObject(error.ptr(), args.ptr());
    }
  });

  m.attr("SAMPLE_RATE") = kSampleRate;
  m.attr("DATA_DIR") = FRAMEBEAT_DATA_DIR;

  m.def("crossfade_window", &crossfade_window_seconds, py::arg("bpm"));
  m.def(
      "fit_bars", [](double seconds, double bpm) { return fit_bars(seconds, SessionClock::from_bpm(bpm)); },
      py::arg("seconds"), py::arg("bpm"));
  m.def(
      "quantize_to_bar",
      [](double seconds, double bpm) {
        return to_seconds(quantize_to_bar(from_seconds(seconds), SessionClock::from_bpm(bpm)));
      },
      py::arg("seconds"), py::arg("bpm"));
  m.def(
      "envelope_gains",
      [](std::size_t n, std::size_t window, std::optional<double> alpha) {
        const Gains g = envelope_gains(family_of(alpha), n, window);
        return py::make_tuple(g.out, g.in);
      },
      py::arg("n"), py::arg("window"), py::arg("alpha") = py::none());
  m.def(
      "splice",
      [](const Array& out, const Array& in, std::size_t window, std::optional<double> alpha) {
        return to_array(splice(to_buffer(out), to_buffer(in),
                               CrossfadePlan{family_of(alpha), window, double(window) / kSampleRate}));
      },
      py::arg("outgoing"), py::arg("incoming"), py::arg("window"), py::arg("alpha") = py::none());
  m.def(
      "select_envelope",
      [](const Array& out, const Array& in, std::size_t window, double lambda, const std::string& role) {
        const AudioBuffer a = to_buffer(out);
        const AudioBuffer b = to_buffer(in);
        SectionRole r = SectionRole::Verse;
        if (!parse_section_role(role, r)) throw Error(ErrorCode::ConfigError, "unknown section role " + role);
        const EnvelopeChoice c = select_envelope(make_splice_context(a, b, window, r, lambda), a, b, window);
        py::dict d;
        d["family"] = c.family.describe();
        d["alpha"] = c.family.kind() == EnvelopeKind::PowerLaw ? py::object(py::float_(c.family.alpha())) : py::none();
        d["loudness_mismatch"] = c.cost.loudness_mismatch;
        d["transient"] = c.cost.transient_cost;
        d["total"] = c.cost.total;
        return d;
      },
      py::arg("outgoing"), py::arg("incoming"), py::arg("window"), py::arg("lam") = 1.0, py::arg("role") = "verse");

  m.def(
      "encode_wav", [](const Array& audio) { return to_bytes(encode_wav(to_buffer(audio))); }, py::arg("audio"));
  m.def(
      "decode_wav",
      [](const py::bytes& data) {
        const std::string s = data;
        return to_array(decode_wav(std::vector<std::uint8_t>(s.begin(), s.end())));
      },
      py::arg("data"));

  m.def(
      "build_prompt",
      [](const std::string& caption_json, const std::string& instruments, std::size_t k,
         std::optional<std::string> genre, std::optional<double> bpm) {
        const SceneCaption c = caption_from_json(json::parse(caption_json));
        std::optional<LockedStyle> locked;
        if (genre || bpm) locked = LockedStyle{genre.value_or(c.genre), bpm.value_or(c.bpm.value_or(100.0))};
        return build_prompt(c, InstrumentSelection::parse(instruments), k, locked).text;
      },
      py::arg("caption_json"), py::arg("instruments"), py::arg("k"), py::arg("genre") = py::none(),
      py::arg("bpm") = py::none());

  m.def(
      "parse_device_line", [](const std::string& line) { return encode(parse_line(line)); }, py::arg("line"));
  m.def(
      "encode_display",
      [](int bpm, const std::string& role, int level, int leds, const std::string& genre) {
        DisplayState d;
        d.bpm = bpm;
        if (!parse_section_role(role, d.section_role)) throw Error(ErrorCode::ProtocolError, "unknown role " + role);
        d.audio_level = level;
        d.led_mask = static_cast<std::uint8_t>(leds);
        d.genre = genre;
        return encode_display(d);
      },
      py::arg("bpm"), py::arg("role"), py::arg("level"), py::arg("leds"), py::arg("genre"));

  m.def(
      "compose",
      [](const std::vector<std::string>& images, const std::string& instruments, bool zero_latency, bool auto_mix,
         bool master, std::optional<std::string> config_json, std::optional<std::string> data_dir) {
        const AppConfig config = make_config(config_json, data_dir, zero_latency);
        ComposeOptions options;
        options.frames = load_frames(images);
        options.instruments = InstrumentSelection::parse(instruments);
        options.auto_mix = auto_mix;
        options.master = master;
        ComposeResult r;
        {
          py::gil_scoped_release release;
          r = compose(config, options);
        }
        py::dict d;
        d["wav"] = to_bytes(encode_wav(r.audio));
        d["log"] = r.log_jsonl();
        d["report"] = r.report.to_json().dump();
        d["state"] = r.state.dump();
        d["fingerprint"] = hex64(fingerprint(r.audio));
        d["underruns"] = r.underruns;
        return d;
      },
      py::arg("images"), py::arg("instruments") = "keys", py::arg("zero_latency") = false,
      py::arg("auto_mix") = false, py::arg("master") = false, py::arg("config_json") = py::none(),
      py::arg("data_dir") = py::none());
  m.def(
      "render",
      [](const std::string& log) {
        std::istringstream in(log);
        const RecordedSession rec = RecordedSession::parse(in);
        AudioBuffer audio;
        {
          py::gil_scoped_release release;
          audio = replay_render(rec);
        }
        return to_bytes(encode_wav(audio));
      },
      py::arg("log"));

  py::class_<PyService>(m, "Service")
      .def(py::init([](std::optional<std::string> config_json, std::optional<std::string> data_dir,
                       bool zero_latency) {
             return std::make_unique<PyService>(make_config(config_json, data_dir, zero_latency));
           }),
           py::arg("config_json") = py::none(), py::arg("data_dir") = py::none(), py::arg("zero_latency") = false)
      .def("start", &PyService::start, py::arg("host") = "127.0.0.1", py::arg("port") = 0)
      .def("stop", &PyService::stop)
      .def("handle", &PyService::handle, py::arg("method"), py::arg("path"),
           py::arg("query") = std::map<std::string, std::string>{}, py::arg("body") = "")
      .def("device_line", &PyService::device_line, py::arg("line"));
}
