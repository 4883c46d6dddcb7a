#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace connear {

// Flat `key = value` text file. Lines starting with '#' are comments.
class KeyValueFile {
 public:
  KeyValueFile() = default;

  static KeyValueFile parse(std::string_view text, const std::string& source = "<memory>");
  static KeyValueFile load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::string render() const;

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);
  void set(const std::string& key, bool value);

  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

 private:
  std::string source_;
  std::map<std::string, std::string> entries_;
};

// Typed, consuming view over a KeyValueFile. `finish()` rejects every key that
// was never read.
class KeyValueReader {
 public:
  explicit KeyValueReader(const KeyValueFile& file) : file_(file) {}

  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  long long get_int(const std::string& key, long long fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback);
  bool has(const std::string& key) const { return file_.contains(key); }

  void finish() const;

 private:
  const std::string* lookup(const std::string& key);

  const KeyValueFile& file_;
  std::set<std::string> used_;
};

// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

}  // namespace connear
