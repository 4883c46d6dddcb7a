#include "connear/kv_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "connear/error.hpp"

namespace connear {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

KeyValueFile KeyValueFile::parse(std::string_view text, const std::string& source) {
  KeyValueFile out;
  out.source_ = source;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw UsageError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw UsageError(source + ":" + std::to_string(line_no) + ": empty key");
    if (!out.entries_.emplace(key, value).second)
      throw UsageError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
  }
  return out;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::string KeyValueFile::render() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

void KeyValueFile::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config file " + path.string());
  out << render();
}

void KeyValueFile::set(const std::string& key, const std::string& value) { entries_[key] = value; }
void KeyValueFile::set(const std::string& key, double value) { entries_[key] = format_double(value); }
void KeyValueFile::set(const std::string& key, long long value) { entries_[key] = std::to_string(value); }
void KeyValueFile::set(const std::string& key, bool value) { entries_[key] = value ? "true" : "false"; }

const std::string* KeyValueReader::lookup(const std::string& key) {
  used_.insert(key);
  const auto it = file_.entries().find(key);
  return it == file_.entries().end() ? nullptr : &it->second;
}

std::string KeyValueReader::get_string(const std::string& key, const std::string& fallback) {
  const auto* v = lookup(key);
  return v ? *v : fallback;
}

double KeyValueReader::get_double(const std::string& key, double fallback) {
  const auto* v = lookup(key);
  if (!v) return fallback;
  double out = 0.0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc{} || res.ptr != v->data() + v->size())
    throw UsageError(file_.source() + ": '" + key + "' is not a number: " + *v);
  return out;
}

long long KeyValueReader::get_int(const std::string& key, long long fallback) {
  const auto* v = lookup(key);
  if (!v) return fallback;
  long long out = 0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc{} || res.ptr != v->data() + v->size())
    throw UsageError(file_.source() + ": '" + key + "' is not an integer: " + *v);
  return out;
}

bool KeyValueReader::get_bool(const std::string& key, bool fallback) {
  const auto* v = lookup(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw UsageError(file_.source() + ": '" + key + "' is not a boolean: " + *v);
}

std::vector<double> KeyValueReader::get_doubles(const std::string& key, std::vector<double> fallback) {
  const auto* v = lookup(key);
  if (!v) return fallback;
  std::vector<double> out;
  std::string_view rest(*v);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    double x = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), x);
    if (item.empty() || res.ec != std::errc{} || res.ptr != item.data() + item.size())
      throw UsageError(file_.source() + ": '" + key + "' is not a number list: " + *v);
    out.push_back(x);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  return out;
}

void KeyValueReader::finish() const {
  std::string unknown;
  for (const auto& [k, v] : file_.entries())
    if (!used_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  if (!unknown.empty()) throw UsageError(file_.source() + ": unknown keys: " + unknown);
}

}  // namespace connear
