#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "framebeat/audio.hpp"
#include "framebeat/error.hpp"
#include "support.hpp"

using namespace framebeat;

namespace {

void put_u16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(x & 0xFF);
  v.push_back(x >> 8);
}
void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) v.push_back((x >> (8 * i)) & 0xFF);
}
void put_tag(std::vector<std::uint8_t>& v, const char* tag) { v.insert(v.end(), tag, tag + 4); }

// Independent writer used as an oracle for the decoder.
std::vector<std::uint8_t> wav_bytes(int format, int channels, int rate, int bits, const std::vector<std::uint8_t>& data,
                                    bool extra_chunk = false) {
  std::vector<std::uint8_t> v;
  put_tag(v, "RIFF");
  put_u32(v, 0);
  put_tag(v, "WAVE");
  if (extra_chunk) {
    put_tag(v, "LIST");
    put_u32(v, 3);
    v.insert(v.end(), {'a', 'b', 'c', 0});  // odd size, padded
  }
  put_tag(v, "fmt ");
  put_u32(v, 16);
  put_u16(v, static_cast<std::uint16_t>(format));
  put_u16(v, static_cast<std::uint16_t>(channels));
  put_u32(v, static_cast<std::uint32_t>(rate));
  put_u32(v, static_cast<std::uint32_t>(rate * channels * bits / 8));
  put_u16(v, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(v, static_cast<std::uint16_t>(bits));
  put_tag(v, "data");
  put_u32(v, static_cast<std::uint32_t>(data.size()));
  v.insert(v.end(), data.begin(), data.end());
  const auto riff = static_cast<std::uint32_t>(v.size() - 8);
  std::memcpy(&v[4], &riff, 4);
  return v;
}

}  // namespace

TEST_CASE("fnv1a64 matches the reference vectors") {
  const std::string a = "a";
  const std::string foobar = "foobar";
  CHECK(fnv1a64({}) == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64({reinterpret_cast<const std::uint8_t*>(a.data()), a.size()}) == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64({reinterpret_cast<const std::uint8_t*>(foobar.data()), foobar.size()}) == 0x85944171f73967e8ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("encode_wav writes the canonical 44-byte header") {
  const AudioBuffer b = fbtest::constant(10, 0.5f);
  const auto bytes = encode_wav(b);
  REQUIRE(bytes.size() == 44 + 10 * 4);
  CHECK(std::memcmp(bytes.data(), "RIFF", 4) == 0);
  CHECK(std::memcmp(bytes.data() + 8, "WAVEfmt ", 8) == 0);
  std::uint32_t riff = 0, rate = 0, data = 0;
  std::uint16_t fmt = 0, ch = 0, bits = 0;
  std::memcpy(&riff, bytes.data() + 4, 4);
  std::memcpy(&fmt, bytes.data() + 20, 2);
  std::memcpy(&ch, bytes.data() + 22, 2);
  std::memcpy(&rate, bytes.data() + 24, 4);
  std::memcpy(&bits, bytes.data() + 34, 2);
  std::memcpy(&data, bytes.data() + 40, 4);
  CHECK(riff == bytes.size() - 8);
  CHECK(fmt == 1);
  CHECK(ch == 2);
  CHECK(rate == 44100);
  CHECK(bits == 16);
  CHECK(data == 40);
}

TEST_CASE("pcm16 round trip stays within one quantization step") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> l(257), r(257);
    for (auto& x : l) x = u(rng);
    for (auto& x : r) x = u(rng);
    l[0] = 1.0f;
    r[0] = -1.0f;
    const AudioBuffer in(l, r);
    const AudioBuffer out = decode_wav(encode_wav(in));
    REQUIRE(out.frames() == in.frames());
    for (int c = 0; c < 2; ++c)
      for (std::size_t n = 0; n < in.frames(); ++n) CHECK(std::abs(out.at(c, n) - in.at(c, n)) <= 1.0 / 32768.0);
  }
}

TEST_CASE("quantize_pcm16 clamps and rounds") {
  CHECK(quantize_pcm16(0.0f) == 0);
  CHECK(quantize_pcm16(2.0f) == 32767);
  CHECK(quantize_pcm16(-2.0f) == -32768);
  CHECK(quantize_pcm16(1.0f) == 32767);
  CHECK(quantize_pcm16(-1.0f) == -32768);
  CHECK(quantize_pcm16(1.0f / 32768.0f) == 1);
}

TEST_CASE("full-scale pair encodes to the two's-complement extremes") {
  const auto bytes = encode_wav(AudioBuffer(std::vector<float>{1.0f}, std::vector<float>{-1.0f}));
  REQUIRE(bytes.size() == 48);
  CHECK(bytes[44] == 0xFF);
  CHECK(bytes[45] == 0x7F);
  CHECK(bytes[46] == 0x00);
  CHECK(bytes[47] == 0x80);
}

TEST_CASE("decode_wav accepts mono float32 and resamples other rates") {
  std::vector<std::uint8_t> data;
  const float samples[4] = {0.25f, -0.5f, 1.5f, 0.0f};
  for (float s : samples) {
    std::uint32_t u;
    std::memcpy(&u, &s, 4);
    put_u32(data, u);
  }
  const AudioBuffer mono = decode_wav(wav_bytes(3, 1, 44100, 32, data, true));
  REQUIRE(mono.frames() == 4);
  CHECK(mono.at(0, 0) == doctest::Approx(0.25));
  CHECK(mono.at(1, 1) == doctest::Approx(-0.5));
  CHECK(mono.at(0, 2) == 1.0f);  // clamped

  std::vector<std::uint8_t> pcm;
  for (int i = 0; i < 22050; ++i) {
    put_u16(pcm, static_cast<std::uint16_t>(static_cast<std::int16_t>(i % 100)));
    put_u16(pcm, 0);
  }
  const AudioBuffer up = decode_wav(wav_bytes(1, 2, 22050, 16, pcm));
  CHECK(up.frames() == 44100);
  CHECK(up.sample_rate() == 44100);
}

TEST_CASE("decode_wav rejects malformed and unsupported input") {
  const std::vector<std::uint8_t> junk{'R', 'I', 'F', 'F', 0, 0};
  CHECK_THROWS_AS(decode_wav(junk), Error);
  try {
    decode_wav(junk);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedContainer);
  }
  std::vector<std::uint8_t> data(12, 0);
  try {
    decode_wav(wav_bytes(1, 2, 44100, 24, data));
    FAIL("24-bit accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedEncoding);
  }
  try {
    decode_wav(wav_bytes(1, 6, 44100, 16, data));
    FAIL("six channels accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedEncoding);
  }
}

TEST_CASE("rms_power matches a direct computation") {
  const AudioBuffer b = fbtest::noise(1000, 0.5, 3);
  const PowerMeasure p = rms_power(b, 100, 400);
  double s = 0.0;
  for (int c = 0; c < 2; ++c)
    for (std::size_t n = 100; n < 500; ++n) s += double(b.at(c, n)) * b.at(c, n);
  CHECK(p.rms == doctest::Approx(std::sqrt(s / 800.0)).epsilon(1e-12));
  CHECK(p.rms_db == doctest::Approx(20.0 * std::log10(p.rms)));
  CHECK(std::isinf(rms_power(AudioBuffer(10)).rms_db));
  CHECK_THROWS_AS(rms_power(b, 900, 200), Error);
}

TEST_CASE("slice, tail and mono_mix") {
  std::vector<float> l{1, 2, 3, 4}, r{3, 4, 5, 6};
  const AudioBuffer b(l, r);
  CHECK(b.tail(2).at(0, 0) == 3.0f);
  CHECK(b.slice(1, 2).at(1, 1) == 5.0f);
  CHECK(b.mono_mix() == std::vector<float>{2, 3, 4, 5});
  CHECK_THROWS_AS(b.slice(3, 2), Error);
  CHECK_THROWS_AS(AudioBuffer(std::vector<float>{1}, std::vector<float>{1, 2}), Error);
}

TEST_CASE("resample_linear keeps length ratio and endpoints") {
  const AudioBuffer in = fbtest::constant(480, 0.25f);
  const AudioBuffer out = resample_linear(AudioBuffer(in.channel(0).size(), 48000), 44100);
  CHECK(out.frames() == 441);
  const AudioBuffer c = resample_linear(AudioBuffer(std::vector<float>(3, 0.25f), std::vector<float>(3, 0.25f), 48000), 44100);
  for (float v : c.channel(0)) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("wav files round trip on disk") {
  const AudioBuffer b = fbtest::noise(500, 0.3, 5);
  const std::string path = "audio_roundtrip_test.wav";
  write_wav_file(path, b);
  const AudioBuffer back = read_wav_file(path);
  CHECK(encode_wav(back) == encode_wav(b));
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_wav_file("does/not/exist.wav"), Error);
}
