#include "connear/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "binary_io.hpp"
#include "connear/error.hpp"

namespace connear {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct Format {
  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

}  // namespace

Stimulus read_wav(std::istream& in) {
  detail::Reader r(in, "wav");
  r.expect_magic("RIFF");
  r.u32();  // RIFF size; some writers get it wrong, chunks are walked instead
  r.expect_magic("WAVE");

  Format fmt;
  bool have_fmt = false;
  std::vector<char> payload;
  std::uint64_t payload_offset = 0;
  bool have_data = false;

  while (!have_data) {
    if (r.at_end()) r.fail(have_fmt ? "no data chunk" : "no fmt chunk");
    char id[4];
    r.bytes(id, 4);
    const std::uint32_t size = r.u32();
    const std::uint64_t start = r.offset();
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) r.fail("fmt chunk too short (" + std::to_string(size) + " bytes)");
      fmt.tag = r.le<std::uint16_t>();
      fmt.channels = r.le<std::uint16_t>();
      fmt.rate = r.u32();
      r.u32();  // byte rate
      fmt.block_align = r.le<std::uint16_t>();
      fmt.bits = r.le<std::uint16_t>();
      std::uint32_t consumed = 16;
      if (fmt.tag == kFormatExtensible) {
        if (size < 40) r.fail("extensible fmt chunk too short");
        r.le<std::uint16_t>();  // cbSize
        r.le<std::uint16_t>();  // valid bits
        r.u32();                // channel mask
        fmt.tag = r.le<std::uint16_t>();  // first two bytes of the subformat GUID
        char rest[14];
        r.bytes(rest, 14);
        consumed = 40;
      }
      std::vector<char> skip(size - consumed + (size & 1));
      if (!skip.empty()) r.bytes(skip.data(), skip.size());
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) r.fail("data chunk before fmt chunk");
      payload_offset = start;
      payload.resize(size);
      if (size) r.bytes(payload.data(), size);
      have_data = true;
    } else {
      std::vector<char> skip(size + (size & 1));
      if (!skip.empty()) r.bytes(skip.data(), skip.size());
    }
  }

  if (fmt.channels != 1)
    throw DataError("wav: " + std::to_string(fmt.channels) +
                    " channels; only mono input is accepted (no implicit downmix)");
  if (fmt.rate == 0) throw DataError("wav: zero sample rate");
  const bool pcm = fmt.tag == kFormatPcm && (fmt.bits == 16 || fmt.bits == 24);
  const bool flt = fmt.tag == kFormatFloat && fmt.bits == 32;
  if (!pcm && !flt)
    throw DataError("wav: unsupported encoding (format tag " + std::to_string(fmt.tag) + ", " +
                    std::to_string(fmt.bits) + " bits)");
  const std::size_t width = fmt.bits / 8;
  if (fmt.block_align != width) throw DataError("wav: block align does not match sample width");
  if (payload.size() % width != 0)
    throw DataError("wav: data chunk at byte offset " + std::to_string(payload_offset) +
                    " holds a partial sample");

  Stimulus audio;
  audio.rate = fmt.rate;
  audio.label.kind = StimulusKind::kAudio;
  const std::size_t n = payload.size() / width;
  audio.samples.resize(n);
  const auto* b = reinterpret_cast<const unsigned char*>(payload.data());
  for (std::size_t i = 0; i < n; ++i, b += width) {
    if (fmt.bits == 16) {
      const auto v = static_cast<std::int16_t>(b[0] | (b[1] << 8));
      audio.samples[i] = v / 32768.0;
    } else if (fmt.bits == 24) {
      std::int32_t v = b[0] | (b[1] << 8) | (b[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      audio.samples[i] = v / 8388608.0;
    } else {
      const std::uint32_t u = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
      const float v = std::bit_cast<float>(u);
      if (!std::isfinite(v))
        throw DataError("wav: non-finite sample at byte offset " +
                        std::to_string(payload_offset + i * width));
      audio.samples[i] = v;
    }
  }
  return audio;
}

Stimulus read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return read_wav(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_wav(std::ostream& out, const Stimulus& audio, WavEncoding encoding) {
  using namespace detail;
  const double rounded = std::round(audio.rate);
  if (!(audio.rate > 0.0) || rounded != audio.rate || rounded > 4294967295.0)
    throw UsageError("write_wav: sample rate must be a positive integer");
  const std::uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : encoding == WavEncoding::kPcm24 ? 24 : 32;
  const std::uint16_t tag = encoding == WavEncoding::kFloat32 ? kFormatFloat : kFormatPcm;
  const std::uint32_t width = bits / 8;
  const std::uint64_t data_bytes = audio.samples.size() * width;
  if (data_bytes + 36 > 0xFFFFFFFFull) throw UsageError("write_wav: too long for RIFF");
  const auto rate = static_cast<std::uint32_t>(rounded);

  out.write("RIFF", 4);
  put_u32(out, static_cast<std::uint32_t>(36 + data_bytes + (data_bytes & 1)));
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(out, 16);
  put_le<std::uint16_t>(out, tag);
  put_le<std::uint16_t>(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * width);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(width));
  put_le<std::uint16_t>(out, bits);
  out.write("data", 4);
  put_u32(out, static_cast<std::uint32_t>(data_bytes));
  for (double x : audio.samples) {
    if (encoding == WavEncoding::kFloat32) {
      put_f32(out, static_cast<float>(x));
      continue;
    }
    // Same scale as the reader; +1.0 clips to the largest code.
    const double full = encoding == WavEncoding::kPcm16 ? 32768.0 : 8388608.0;
    const double scaled = std::clamp(std::round(x * full), -full, full - 1.0);
    const auto v = static_cast<std::int32_t>(scaled);
    for (std::uint32_t i = 0; i < width; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  if (data_bytes & 1) out.put(0);
}

void write_wav(const std::filesystem::path& path, const Stimulus& audio, WavEncoding encoding) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_wav(out, audio, encoding);
  out.flush();
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace connear
