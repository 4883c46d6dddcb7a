#include "connear/serialization.hpp"

#include <fstream>

#include "binary_io.hpp"
#include "connear/error.hpp"

namespace connear {

namespace {

constexpr std::uint32_t kEndianTag = 0x01020304;

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void finish_write(std::ostream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

void write_model(std::ostream& out, const SurrogateModel& model) {
  using namespace detail;
  const ArchitectureSpec& s = model.spec();
  out.write("CNNW", 4);
  put_u32(out, kModelFormatVersion);
  put_u32(out, kEndianTag);
  for (std::size_t v : {s.n_layers, s.filters, s.filter_length, s.stride,
                        static_cast<std::size_t>(s.activation), s.window.core, s.window.left,
                        s.window.right, s.n_cf})
    put_u32(out, static_cast<std::uint32_t>(v));
  put_u64(out, model.parameter_count());
  put_f32_array(out, model.parameters().data(), model.parameters().size());
}

SurrogateModel read_model(std::istream& in) {
  detail::Reader r(in, "model");
  r.expect_magic("CNNW");
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion) r.fail("unsupported model version " + std::to_string(version));
  if (r.u32() != kEndianTag) r.fail("bad endianness tag");

  ArchitectureSpec s;
  s.n_layers = r.u32();
  s.filters = r.u32();
  s.filter_length = r.u32();
  s.stride = r.u32();
  const std::uint32_t act = r.u32();
  if (act > 1) r.fail("unknown activation code " + std::to_string(act));
  s.activation = static_cast<Activation>(act);
  s.window.core = r.u32();
  s.window.left = r.u32();
  s.window.right = r.u32();
  s.n_cf = r.u32();
  try {
    s.validate();
  } catch (const UsageError& e) {
    r.fail(std::string("invalid architecture in header (") + e.what() + ")");
  }

  const std::uint64_t count = r.u64();
  const std::size_t expected = parameter_count(s);
  if (count != expected)
    r.fail("parameter count " + std::to_string(count) + " does not match the architecture (" +
           std::to_string(expected) + ")");

  SurrogateModel model(s);
  r.f32_array(model.parameters().data(), model.parameters().size());
  if (!r.at_end()) r.fail("trailing bytes after the parameter payload");
  return model;
}

void save_model(const std::filesystem::path& path, const SurrogateModel& model) {
  auto out = open_out(path);
  write_model(out, model);
  finish_write(out, path);
}

SurrogateModel load_model(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_model(in);
}

void write_matrix(std::ostream& out, const MatrixContainer& matrix) {
  using namespace detail;
  const BMResponse& r = matrix.response;
  if (r.data.size() != r.length * r.n_cf())
    throw UsageError("write_matrix: payload size does not match length x channels");
  out.write("BMRX", 4);
  put_u32(out, kMatrixFormatVersion);
  put_f64(out, r.rate);
  put_f64(out, matrix.source_rate);
  put_u64(out, r.length);
  put_u32(out, static_cast<std::uint32_t>(r.n_cf()));
  for (double cf : r.map.cfs()) put_f64(out, cf);
  put_f32_array(out, r.data.data(), r.data.size());
}

MatrixContainer read_matrix(std::istream& in) {
  detail::Reader r(in, "matrix");
  r.expect_magic("BMRX");
  const std::uint32_t version = r.u32();
  if (version != kMatrixFormatVersion) r.fail("unsupported matrix version " + std::to_string(version));
  const double rate = r.f64();
  const double source_rate = r.f64();
  if (!(rate > 0.0)) r.fail("nonpositive sample rate");
  const std::uint64_t rows = r.u64();
  const std::uint32_t cols = r.u32();
  if (cols == 0) r.fail("zero channels");
  std::vector<double> cfs(cols);
  for (double& cf : cfs) cf = r.f64();
  CochlearMap map;
  try {
    map = CochlearMap(std::move(cfs));
  } catch (const Error& e) {
    r.fail(std::string("invalid channel map (") + e.what() + ")");
  }
  // Refuse absurd sizes before allocating.
  if (rows > (std::uint64_t{1} << 40) / cols) r.fail("row count " + std::to_string(rows) + " is implausible");

  MatrixContainer m;
  m.source_rate = source_rate;
  m.response = BMResponse(static_cast<std::size_t>(rows), std::move(map), rate);
  r.f32_array(m.response.data.data(), m.response.data.size());
  if (!r.at_end()) r.fail("trailing bytes after the payload");
  return m;
}

void save_matrix(const std::filesystem::path& path, const MatrixContainer& matrix) {
  auto out = open_out(path);
  write_matrix(out, matrix);
  finish_write(out, path);
}

MatrixContainer load_matrix(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_matrix(in);
}

}  // namespace connear
