#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

namespace zc {

// `key = value` lines; `#` starts a comment; later keys override earlier ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void merge(const KeyValueConfig& other);

  std::string get(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Throws ConfigError naming the first key not in `known`.
  void check_keys(const std::set<std::string>& known) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  // Sorted `key = value` lines.
  std::string str() const;

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

}  // namespace zc
