#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rismask/errors.hpp"

namespace rismask {

/// Flat `key = value` store. Lines starting with `#` are comments; later
/// assignments of the same key win, which is how CLI overrides are layered.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text, std::string_view origin = "<text>") {
    KeyValues kv;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      std::string_view line = raw;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw Error(ErrorCode::invalid_config, std::string(origin) + ":" + std::to_string(line_no) +
                                                   ": expected key = value");
      const auto key = trim(line.substr(0, eq));
      if (key.empty())
        throw Error(ErrorCode::invalid_config,
                    std::string(origin) + ":" + std::to_string(line_no) + ": empty key");
      kv.set(std::string(key), std::string(trim(line.substr(eq + 1))));
    }
    return kv;
  }

  static KeyValues load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }

  /// Applies `key=value` override strings.
  void apply_overrides(const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos)
        throw Error(ErrorCode::invalid_config, "override '" + o + "' is not key=value");
      set(std::string(trim(std::string_view(o).substr(0, eq))),
          std::string(trim(std::string_view(o).substr(eq + 1))));
    }
  }

  bool contains(const std::string& key) const { return values_.count(key) != 0; }

  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : to_double(key, it->second);
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : to_int(key, it->second);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const auto& v = it->second;
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw Error(ErrorCode::invalid_config, "key '" + key + "': expected boolean, got '" + v + "'");
  }

  std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(it->second)) out.push_back(to_double(key, item));
    return out;
  }

  std::vector<std::int64_t> get_int_list(const std::string& key,
                                         std::vector<std::int64_t> fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::int64_t> out;
    for (const auto& item : split_list(it->second)) out.push_back(to_int(key, item));
    return out;
  }

  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  }

 private:
  static std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= v.size()) {
      const auto end = std::min(v.find(',', pos), v.size());
      const auto item = trim(std::string_view(v).substr(pos, end - pos));
      if (!item.empty()) out.emplace_back(item);
      pos = end + 1;
    }
    return out;
  }

  static double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* first = v.data();
    const auto* last = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last)
      throw Error(ErrorCode::invalid_config, "key '" + key + "': '" + v + "' is not a number");
    return out;
  }

  static std::int64_t to_int(const std::string& key, const std::string& v) {
    std::int64_t out = 0;
    const auto* first = v.data();
    const auto* last = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last)
      throw Error(ErrorCode::invalid_config, "key '" + key + "': '" + v + "' is not an integer");
    return out;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace rismask
