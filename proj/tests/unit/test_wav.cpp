#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "connear/error.hpp"
#include "connear/wav.hpp"

using namespace connear;

namespace {

Stimulus test_signal(double rate, std::size_t n) {
  Stimulus s;
  s.rate = rate;
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.samples[i] = 0.9 * std::sin(0.01 * static_cast<double>(i * i % 997));
  return s;
}

std::string to_bytes(const Stimulus& s, WavEncoding e) {
  std::ostringstream out;
  write_wav(out, s, e);
  return out.str();
}

Stimulus from_bytes(const std::string& bytes) {
  std::istringstream in(bytes);
  return read_wav(in);
}

void put16(std::string& b, std::size_t at, std::uint16_t v) {
  b[at] = static_cast<char>(v & 0xFF);
  b[at + 1] = static_cast<char>(v >> 8);
}

}  // namespace

TEST_SUITE("wav") {

TEST_CASE("float32 round trip is exact to float precision") {
  const Stimulus s = test_signal(16000.0, 1001);
  const Stimulus r = from_bytes(to_bytes(s, WavEncoding::kFloat32));
  CHECK(r.rate == 16000.0);
  REQUIRE(r.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(r.samples[i] == static_cast<float>(s.samples[i]));
}

TEST_CASE("integer PCM round trips within one quantization step") {
  const Stimulus s = test_signal(20000.0, 500);
  const Stimulus a = from_bytes(to_bytes(s, WavEncoding::kPcm16));
  const Stimulus b = from_bytes(to_bytes(s, WavEncoding::kPcm24));
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(std::abs(a.samples[i] - s.samples[i]) <= 0.5 / 32768.0 + 1e-12);
    CHECK(std::abs(b.samples[i] - s.samples[i]) <= 0.5 / 8388608.0 + 1e-12);
  }
}

TEST_CASE("odd-sized data chunk is padded and still readable") {
  const Stimulus s = test_signal(20000.0, 3);
  const std::string bytes = to_bytes(s, WavEncoding::kPcm24);
  CHECK(bytes.size() == 44 + 9 + 1);
  CHECK(from_bytes(bytes).size() == 3);
}

TEST_CASE("multichannel input is rejected, not downmixed") {
  std::string bytes = to_bytes(test_signal(20000.0, 10), WavEncoding::kPcm16);
  put16(bytes, 22, 2);  // channel count
  put16(bytes, 32, 4);  // block align
  try {
    from_bytes(bytes);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("mono") != std::string::npos);
  }
}

TEST_CASE("corrupt header names the byte offset") {
  std::string bytes = to_bytes(test_signal(20000.0, 10), WavEncoding::kPcm16);
  bytes[8] = 'X';  // "WAVE" magic
  try {
    from_bytes(bytes);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("byte offset 8") != std::string::npos);
  }
}

TEST_CASE("truncated payload and partial samples are data errors") {
  const std::string bytes = to_bytes(test_signal(20000.0, 10), WavEncoding::kPcm16);
  CHECK_THROWS_AS(from_bytes(bytes.substr(0, bytes.size() - 3)), DataError);
  std::string odd = bytes;
  odd[40] = 19;  // data size no longer a multiple of the sample width
  CHECK_THROWS_AS(from_bytes(odd.substr(0, 44 + 19)), DataError);
}

TEST_CASE("non-finite float samples are rejected") {
  Stimulus s = test_signal(20000.0, 4);
  s.samples[2] = std::nan("");
  CHECK_THROWS_AS(from_bytes(to_bytes(s, WavEncoding::kFloat32)), DataError);
}

TEST_CASE("extensible format with a PCM subformat is accepted") {
  const Stimulus s = test_signal(16000.0, 8);
  const std::string plain = to_bytes(s, WavEncoding::kPcm16);
  // Rebuild with a 40-byte fmt chunk.
  std::string fmt = plain.substr(20, 16);
  put16(fmt, 0, 0xFFFE);
  std::string ext = fmt + std::string("\x16\x00\x10\x00\x04\x00\x00\x00", 8) + std::string("\x01\x00", 2) +
                    std::string(14, '\x00');
  std::string bytes = "RIFF" + std::string(4, '\0') + "WAVE" + "fmt " + std::string("\x28\x00\x00\x00", 4) + ext +
                      plain.substr(36);
  const Stimulus r = from_bytes(bytes);
  REQUIRE(r.size() == 8);
  CHECK(std::abs(r.samples[5] - s.samples[5]) <= 1.0 / 32768.0);
}

TEST_CASE("writing needs an integral rate") {
  Stimulus s = test_signal(20000.5, 4);
  std::ostringstream out;
  CHECK_THROWS_AS(write_wav(out, s), UsageError);
}

}
