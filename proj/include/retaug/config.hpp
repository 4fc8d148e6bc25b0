#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace retaug {

// `key = value` per line, '#' comments, blank lines ignored. The raw file
// text is kept so reports can embed the exact configuration that ran.
class Config {
 public:
  Config() = default;
  static Config parse(const std::string& text, const std::string& origin = "<string>");
  static Config load(const std::string& path);

  bool has(std::string_view key) const;
  // Throws when the key is missing.
  const std::string& get(std::string_view key) const;

  std::string get_str(std::string_view key, std::string def) const;
  std::int64_t get_int(std::string_view key, std::int64_t def) const;
  std::uint64_t get_u64(std::string_view key, std::uint64_t def) const;
  double get_double(std::string_view key, double def) const;
  bool get_bool(std::string_view key, bool def) const;  // true/false/1/0/yes/no

  // CLI overrides; recorded in the snapshot as appended lines.
  void set(std::string key, std::string value);

  const std::string& snapshot() const { return snapshot_; }
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::string snapshot_;
};

}  // namespace retaug
