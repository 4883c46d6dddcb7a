#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "connear/bm_response.hpp"
#include "connear/surrogate.hpp"

namespace connear {

// Model container (little-endian):
//   "CNNW"  u32 version  u32 endian tag 0x01020304
//   u32 n_layers, filters, filter_length, stride, activation, core, left, right, n_cf
//   u64 parameter count
//   f32 parameters in layer order (weights [out][in][tap], biases, PReLU slopes)
inline constexpr std::uint32_t kModelFormatVersion = 1;

void write_model(std::ostream& out, const SurrogateModel& model);
SurrogateModel read_model(std::istream& in);
void save_model(const std::filesystem::path& path, const SurrogateModel& model);
SurrogateModel load_model(const std::filesystem::path& path);

// Matrix container (little-endian):
//   "BMRX"  u32 version  f64 rate  f64 source rate  u64 rows  u32 cols
//   f64 channel CFs[cols]
//   f32 payload, row-major rows x cols
inline constexpr std::uint32_t kMatrixFormatVersion = 1;

struct MatrixContainer {
  BMResponse response;
  double source_rate = 0.0;  // rate of the stimulus that produced it
};

void write_matrix(std::ostream& out, const MatrixContainer& matrix);
MatrixContainer read_matrix(std::istream& in);
void save_matrix(const std::filesystem::path& path, const MatrixContainer& matrix);
MatrixContainer load_matrix(const std::filesystem::path& path);

}  // namespace connear
