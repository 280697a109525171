#include "framebeat/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "framebeat/error.hpp"

namespace framebeat {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

float sanitize(float v) noexcept {
  if (std::isnan(v)) return 0.0f;
  return std::clamp(v, -1.0f, 1.0f);
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  std::size_t pos() const noexcept { return pos_; }

  void require(std::size_t n, const char* what) const {
    if (remaining() < n) throw Error(ErrorCode::MalformedContainer, std::string("truncated ") + what);
  }

  std::uint16_t u16() {
    require(2, "field");
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }

  std::uint32_t u32() {
    require(4, "field");
    std::uint32_t v = static_cast<std::uint32_t>(bytes_[pos_]) | (static_cast<std::uint32_t>(bytes_[pos_ + 1]) << 8) |
                      (static_cast<std::uint32_t>(bytes_[pos_ + 2]) << 16) |
                      (static_cast<std::uint32_t>(bytes_[pos_ + 3]) << 24);
    pos_ += 4;
    return v;
  }

  bool tag(const char (&expected)[5]) {
    require(4, "tag");
    bool ok = std::memcmp(bytes_.data() + pos_, expected, 4) == 0;
    pos_ += 4;
    return ok;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    require(n, "chunk");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  void skip(std::size_t n) { take(n); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct WavFormat {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  std::uint16_t block_align = 0;
};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

AudioBuffer::AudioBuffer(std::size_t frames, int sample_rate) : sample_rate_(sample_rate) {
  for (auto& ch : channels_) ch.assign(frames, 0.0f);
}

AudioBuffer::AudioBuffer(std::vector<float> left, std::vector<float> right, int sample_rate)
    : channels_{std::move(left), std::move(right)}, sample_rate_(sample_rate) {
  if (channels_[0].size() != channels_[1].size()) {
    throw Error(ErrorCode::WindowOutOfRange, "channel lengths differ");
  }
}

AudioBuffer AudioBuffer::from_mono(std::span<const float> mono, int sample_rate) {
  std::vector<float> ch(mono.begin(), mono.end());
  return AudioBuffer(ch, ch, sample_rate);
}

AudioBuffer AudioBuffer::slice(std::size_t start, std::size_t len) const {
  if (start > frames() || len > frames() - start) {
    throw Error(ErrorCode::WindowOutOfRange, "slice [" + std::to_string(start) + ", +" + std::to_string(len) +
                                                 ") exceeds " + std::to_string(frames()) + " frames");
  }
  AudioBuffer out;
  out.sample_rate_ = sample_rate_;
  for (std::size_t c = 0; c < channels_.size(); ++c) {
    auto first = channels_[c].begin() + static_cast<std::ptrdiff_t>(start);
    out.channels_[c].assign(first, first + static_cast<std::ptrdiff_t>(len));
  }
  return out;
}

AudioBuffer AudioBuffer::tail(std::size_t len) const {
  if (len > frames()) throw Error(ErrorCode::WindowOutOfRange, "tail longer than buffer");
  return slice(frames() - len, len);
}

std::vector<float> AudioBuffer::mono_mix() const {
  std::vector<float> out(frames());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = 0.5f * (channels_[0][n] + channels_[1][n]);
  return out;
}

void AudioBuffer::clamp() {
  for (auto& ch : channels_)
    for (auto& s : ch) s = sanitize(s);
}

double amplitude_to_db(double amplitude) noexcept {
  if (amplitude <= 0.0) return -std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(amplitude);
}

double db_to_amplitude(double db) noexcept { return std::pow(10.0, db / 20.0); }

PowerMeasure rms_power(const AudioBuffer& buf, std::size_t start, std::size_t len) {
  if (start > buf.frames() || len > buf.frames() - start) {
    throw Error(ErrorCode::WindowOutOfRange, "power window exceeds buffer");
  }
  PowerMeasure m;
  m.window_start = start;
  m.window_len = len;
  if (len == 0) {
    m.rms_db = amplitude_to_db(0.0);
    return m;
  }
  double acc = 0.0;
  for (int c = 0; c < kChannels; ++c) {
    auto ch = buf.channel(c);
    for (std::size_t n = start; n < start + len; ++n) acc += static_cast<double>(ch[n]) * ch[n];
  }
  m.rms = std::sqrt(acc / static_cast<double>(len * kChannels));
  m.rms_db = amplitude_to_db(m.rms);
  return m;
}

AudioBuffer resample_linear(const AudioBuffer& in, int target_rate) {
  if (in.sample_rate() == target_rate) return in;
  if (in.sample_rate() <= 0 || target_rate <= 0) {
    throw Error(ErrorCode::UnsupportedEncoding, "non-positive sample rate");
  }
  const double ratio = static_cast<double>(in.sample_rate()) / target_rate;
  const auto out_frames = static_cast<std::size_t>(
      std::llround(static_cast<double>(in.frames()) * target_rate / static_cast<double>(in.sample_rate())));
  AudioBuffer out(out_frames, target_rate);
  if (in.empty()) return out;
  const std::size_t last = in.frames() - 1;
  for (int c = 0; c < kChannels; ++c) {
    auto src = in.channel(c);
    auto dst = out.channel(c);
    for (std::size_t n = 0; n < out_frames; ++n) {
      const double pos = static_cast<double>(n) * ratio;
      const auto i0 = std::min(static_cast<std::size_t>(pos), last);
      const auto i1 = std::min(i0 + 1, last);
      const double frac = pos - static_cast<double>(i0);
      dst[n] = static_cast<float>(src[i0] + (src[i1] - src[i0]) * std::min(frac, 1.0));
    }
  }
  return out;
}

AudioBuffer decode_wav(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 12) throw Error(ErrorCode::MalformedContainer, "shorter than RIFF header");
  if (!r.tag("RIFF")) throw Error(ErrorCode::MalformedContainer, "missing RIFF magic");
  const std::uint32_t riff_size = r.u32();
  if (!r.tag("WAVE")) throw Error(ErrorCode::MalformedContainer, "missing WAVE magic");
  if (riff_size < 4 || riff_size > bytes.size() - 8) {
    throw Error(ErrorCode::MalformedContainer, "RIFF size field does not match payload");
  }

  WavFormat fmt;
  bool have_fmt = false;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  while (r.remaining() >= 8 && !(have_fmt && have_data)) {
    char id[4];
    auto raw = r.take(4);
    std::memcpy(id, raw.data(), 4);
    const std::uint32_t size = r.u32();
    if (size > r.remaining()) throw Error(ErrorCode::MalformedContainer, "chunk size exceeds file");
    auto body = r.take(size);
    if (size % 2 == 1 && r.remaining() > 0) r.skip(1);

    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) throw Error(ErrorCode::MalformedContainer, "fmt chunk too small");
      ByteReader f(body);
      fmt.format = f.u16();
      fmt.channels = f.u16();
      fmt.sample_rate = f.u32();
      f.u32();  // byte rate
      fmt.block_align = f.u16();
      fmt.bits = f.u16();
      if (fmt.format == kFormatExtensible) {
        if (size < 40) throw Error(ErrorCode::MalformedContainer, "extensible fmt chunk too small");
        f.u16();  // cbSize
        f.u16();  // valid bits
        f.u32();  // channel mask
        fmt.format = f.u16();  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = body;
      have_data = true;
    }
  }
  if (!have_fmt) throw Error(ErrorCode::MalformedContainer, "no fmt chunk");
  if (!have_data) throw Error(ErrorCode::MalformedContainer, "no data chunk");

  const bool pcm16 = fmt.format == kFormatPcm && fmt.bits == 16;
  const bool float32 = fmt.format == kFormatFloat && fmt.bits == 32;
  if (!pcm16 && !float32) {
    throw Error(ErrorCode::UnsupportedEncoding, "format tag " + std::to_string(fmt.format) + " with " +
                                                    std::to_string(fmt.bits) + " bits");
  }
  if (fmt.channels != 1 && fmt.channels != 2) {
    throw Error(ErrorCode::UnsupportedEncoding, std::to_string(fmt.channels) + " channels");
  }
  if (fmt.sample_rate == 0) throw Error(ErrorCode::MalformedContainer, "zero sample rate");

  const std::size_t bytes_per_sample = fmt.bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * fmt.channels;
  const std::size_t frames = data.size() / frame_bytes;

  AudioBuffer out(frames, static_cast<int>(fmt.sample_rate));
  for (std::size_t n = 0; n < frames; ++n) {
    for (int c = 0; c < kChannels; ++c) {
      const int src_c = fmt.channels == 1 ? 0 : c;
      const std::uint8_t* p = data.data() + n * frame_bytes + static_cast<std::size_t>(src_c) * bytes_per_sample;
      float v;
      if (pcm16) {
        const auto s = static_cast<std::int16_t>(static_cast<std::uint16_t>(p[0] | (p[1] << 8)));
        v = static_cast<float>(s) / 32768.0f;
      } else {
        std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
        std::memcpy(&v, &u, sizeof v);
        if (std::isinf(v)) v = v > 0 ? 1.0f : -1.0f;
        v = sanitize(v);
      }
      out.at(c, n) = v;
    }
  }
  if (out.sample_rate() != kSampleRate) out = resample_linear(out, kSampleRate);
  return out;
}

std::int16_t quantize_pcm16(float sample) noexcept {
  const double v = static_cast<double>(sanitize(sample)) * 32768.0;
  const long q = std::lround(v);
  return static_cast<std::int16_t>(std::clamp<long>(q, -32768, 32767));
}

std::vector<std::uint8_t> encode_wav(const AudioBuffer& buf) {
  const AudioBuffer& src = buf;
  const auto data_bytes = static_cast<std::uint32_t>(src.frames() * kChannels * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, kChannels);
  put_u32(out, static_cast<std::uint32_t>(src.sample_rate()));
  put_u32(out, static_cast<std::uint32_t>(src.sample_rate()) * kChannels * 2);
  put_u16(out, kChannels * 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (std::size_t n = 0; n < src.frames(); ++n) {
    for (int c = 0; c < kChannels; ++c) put_u16(out, static_cast<std::uint16_t>(quantize_pcm16(src.at(c, n))));
  }
  return out;
}

AudioBuffer read_wav_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

void write_wav_file(const std::string& path, const AudioBuffer& buf) {
  auto bytes = encode_wav(buf);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fingerprint(const AudioBuffer& buf) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  const auto frames = static_cast<std::uint64_t>(buf.frames());
  mix(&frames, sizeof frames);
  for (int c = 0; c < kChannels; ++c) {
    auto ch = buf.channel(c);
    mix(ch.data(), ch.size() * sizeof(float));
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kDigits[value & 0xF];
    value >>= 4;
  }
  return s;
}

}  // namespace framebeat
