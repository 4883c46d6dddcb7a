#pragma once

#include <filesystem>
#include <iosfwd>

#include "connear/stimulus.hpp"

namespace connear {

// Mono RIFF/WAVE in 16-bit or 24-bit integer PCM or 32-bit float. Integer
// samples map full scale to +-1 Pa. Multichannel files are rejected.
Stimulus read_wav(std::istream& in);
Stimulus read_wav(const std::filesystem::path& path);

enum class WavEncoding { kPcm16, kPcm24, kFloat32 };

void write_wav(std::ostream& out, const Stimulus& audio, WavEncoding encoding = WavEncoding::kFloat32);
void write_wav(const std::filesystem::path& path, const Stimulus& audio,
               WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace connear
