#include "retaug/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "retaug/vectors.hpp"  // FormatError

namespace retaug {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config cfg;
  cfg.snapshot_ = text;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw FormatError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key(trim(s.substr(0, eq)));
    std::string value(trim(s.substr(eq + 1)));
    if (key.empty())
      throw FormatError(origin + ":" + std::to_string(lineno) + ": empty key");
    cfg.values_[key] = value;
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

bool Config::has(std::string_view key) const { return values_.count(std::string(key)) != 0; }

const std::string& Config::get(std::string_view key) const {
  auto it = values_.find(std::string(key));
  if (it == values_.end()) throw std::out_of_range("config key missing: " + std::string(key));
  return it->second;
}

std::string Config::get_str(std::string_view key, std::string def) const {
  auto it = values_.find(std::string(key));
  return it == values_.end() ? std::move(def) : it->second;
}

std::int64_t Config::get_int(std::string_view key, std::int64_t def) const {
  auto it = values_.find(std::string(key));
  if (it == values_.end()) return def;
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc() || p != it->second.data() + it->second.size())
    throw FormatError("config key '" + std::string(key) + "': not an integer: " + it->second);
  return v;
}

std::uint64_t Config::get_u64(std::string_view key, std::uint64_t def) const {
  auto it = values_.find(std::string(key));
  if (it == values_.end()) return def;
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc() || p != it->second.data() + it->second.size())
    throw FormatError("config key '" + std::string(key) + "': not a non-negative integer: " +
                      it->second);
  return v;
}

double Config::get_double(std::string_view key, double def) const {
  auto it = values_.find(std::string(key));
  if (it == values_.end()) return def;
  try {
    std::size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing garbage");
    return v;
  } catch (const std::exception&) {
    throw FormatError("config key '" + std::string(key) + "': not a number: " + it->second);
  }
}

bool Config::get_bool(std::string_view key, bool def) const {
  auto it = values_.find(std::string(key));
  if (it == values_.end()) return def;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw FormatError("config key '" + std::string(key) + "': not a boolean: " + v);
}

void Config::set(std::string key, std::string value) {
  if (!snapshot_.empty() && snapshot_.back() != '\n') snapshot_ += '\n';
  snapshot_ += key + " = " + value + "\n";
  values_[std::move(key)] = std::move(value);
}

}  // namespace retaug
