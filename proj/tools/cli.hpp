#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "connear/stimulus.hpp"

namespace connear::cli {

// "40,70", "10:10:90" (start:step:stop) or "1000:6000" (start:stop with
// `default_step`). Ranges include the stop value when it lands on the grid.
std::vector<double> parse_list(const std::string& text, double default_step);

// Built-in stimuli, 20 kHz unless stated:
//   click LEVEL_PESPL [DURATION_S [ONSET_S]]
//   tone FREQ_HZ LEVEL_SPL [DURATION_S]
//   dp F1_HZ L2_DB [RATIO [DURATION_S]]
// Durations default to 0.128 s.
Stimulus parse_preset(const std::string& text, double rate = 20000.0);

// Entry point; returns the process exit code (0 ok, 2 usage, 3 data,
// 4 numerical).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace connear::cli
