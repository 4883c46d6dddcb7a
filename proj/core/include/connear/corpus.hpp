#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "connear/stimulus.hpp"

namespace connear {

// Licence-free training material at 20 kHz.
//   speech-shaped: formant-filtered harmonic complexes with gliding F0,
//     band-passed noise bursts, isolated tones, clicks and pauses
//   music-shaped: sustained harmonic notes and chords, percussive noise hits
// Segment levels vary by +-15 dB inside an item; each item is later
// normalized as a whole.
enum class CorpusPreset { kSpeechShaped, kMusicShaped };

CorpusPreset parse_corpus_preset(const std::string& name);
std::string to_string(CorpusPreset preset);

std::vector<Stimulus> synthetic_corpus(CorpusPreset preset, std::size_t n_items, double item_duration_s,
                                       std::uint64_t seed, double rate = 20000.0);

// Every *.wav in `dir` (sorted by name), or the files listed one per line in
// a text file. Throws DataError for unreadable, empty or missing input.
std::vector<std::filesystem::path> list_corpus_files(const std::filesystem::path& dir_or_list);
std::vector<Stimulus> load_corpus(const std::vector<std::filesystem::path>& files);

}  // namespace connear
