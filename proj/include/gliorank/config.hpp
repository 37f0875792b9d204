#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "gliorank/error.hpp"

namespace gliorank {

/// Shortest decimal text that parses back to the same double ("inf"/"-inf"/"nan" for non-finite).
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_value(const std::string& text, const std::string& where);

template <>
inline std::string parse_value<std::string>(const std::string& text, const std::string&) {
  return text;
}

template <>
inline double parse_value<double>(const std::string& text, const std::string& where) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  require(r.ec == std::errc{} && r.ptr == text.data() + text.size(), errc::invalid_config,
          where + ": not a number: '" + text + "'");
  return v;
}

template <>
inline std::uint64_t parse_value<std::uint64_t>(const std::string& text, const std::string& where) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  require(r.ec == std::errc{} && r.ptr == text.data() + text.size(), errc::invalid_config,
          where + ": not an unsigned integer: '" + text + "'");
  return v;
}

template <>
inline bool parse_value<bool>(const std::string& text, const std::string& where) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  fail(errc::invalid_config, where + ": not a boolean: '" + text + "'");
}

template <class T>
std::string render_value(const T& v) {
  if constexpr (std::is_same_v<T, std::string>)
    return v;
  else if constexpr (std::is_same_v<T, bool>)
    return v ? "true" : "false";
  else if constexpr (std::is_floating_point_v<T>)
    return format_double(v);
  else
    return std::to_string(v);
}

}  // namespace detail

/// Flat INI configuration ([section] + key = value) that remembers every value it resolved,
/// defaults included, so a run can write out the exact configuration it used.
class Config {
 public:
  Config() = default;

  static Config parse(std::istream& is, const std::string& origin = "<config>") {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(is, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      fail(errc::invalid_config, origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    Config c;
    for (const auto& [section, body] : tree) {
      require(!body.empty() || body.data().empty(), errc::invalid_config,
              origin + ": key '" + section + "' outside any section");
      for (const auto& [key, value] : body) c.raw_[section][key] = detail::trim(value.data());
    }
    return c;
  }

  static Config parse_text(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

  static Config load(const std::filesystem::path& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), errc::input_not_found, "input not found: " + path.string());
    return parse(is, path.string());
  }

  bool has(const std::string& section, const std::string& key) const {
    const auto s = raw_.find(section);
    return s != raw_.end() && s->second.count(key) > 0;
  }

  /// Overrides (or adds) a raw value, e.g. from a command-line flag.
  void set(const std::string& section, const std::string& key, const std::string& value) {
    raw_[section][key] = value;
  }

  template <class T>
  T get(const std::string& section, const std::string& key, const T& fallback) {
    if (!has(section, key)) {
      resolved_[section][key] = detail::render_value(fallback);
      return fallback;
    }
    return get<T>(section, key);
  }

  template <class T>
  T get(const std::string& section, const std::string& key) {
    require(has(section, key), errc::invalid_config, "missing required key [" + section + "] " + key);
    const std::string& text = raw_.at(section).at(key);
    T v = detail::parse_value<T>(text, "[" + section + "] " + key);
    resolved_[section][key] = detail::render_value(v);
    return v;
  }

  template <class T>
  std::optional<T> get_optional(const std::string& section, const std::string& key) {
    if (!has(section, key)) return std::nullopt;
    return get<T>(section, key);
  }

  /// Comma-separated list.
  std::vector<std::string> get_list(const std::string& section, const std::string& key,
                                    const std::vector<std::string>& fallback = {}) {
    std::vector<std::string> out;
    if (!has(section, key)) {
      out = fallback;
    } else {
      std::stringstream ss(raw_.at(section).at(key));
      for (std::string item; std::getline(ss, item, ',');) {
        item = detail::trim(item);
        if (!item.empty()) out.push_back(item);
      }
    }
    std::string joined;
    for (std::size_t i = 0; i < out.size(); ++i) joined += (i ? "," : "") + out[i];
    resolved_[section][key] = joined;
    return out;
  }

  /// Records a value that was derived rather than read (it still belongs in the snapshot).
  void record(const std::string& section, const std::string& key, const std::string& value) {
    resolved_[section][key] = value;
  }

  /// Keys present in the input that no code path consumed; usually typos.
  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [section, kv] : raw_)
      for (const auto& [key, value] : kv) {
        const auto s = resolved_.find(section);
        if (s == resolved_.end() || s->second.count(key) == 0) out.push_back("[" + section + "] " + key);
      }
    return out;
  }

  void reject_unused() const {
    const auto unused = unused_keys();
    if (unused.empty()) return;
    std::string msg = "unknown config key";
    for (const auto& k : unused) msg += " " + k;
    fail(errc::invalid_config, msg);
  }

  /// Every resolved value, sections and keys sorted.
  void write_resolved(std::ostream& os) const {
    bool first = true;
    for (const auto& [section, kv] : resolved_) {
      if (!first) os << '\n';
      first = false;
      os << '[' << section << "]\n";
      for (const auto& [key, value] : kv) os << key << " = " << value << '\n';
    }
  }

  void write_resolved(const std::filesystem::path& path) const {
    std::ofstream os(path);
    require(static_cast<bool>(os), errc::io_failure, "cannot open for writing: " + path.string());
    write_resolved(os);
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> raw_;
  std::map<std::string, std::map<std::string, std::string>> resolved_;
};

/// Ordered key = value report (manifests, fit and evaluation reports).
class KeyValueReport {
 public:
  template <class T>
  void add(const std::string& key, const T& value) {
    entries_.emplace_back(key, detail::render_value(value));
  }
  void add(const std::string& key, const char* value) { entries_.emplace_back(key, value); }

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

  std::optional<std::string> find(const std::string& key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return v;
    return std::nullopt;
  }

  void write(std::ostream& os) const {
    for (const auto& [k, v] : entries_) os << k << " = " << v << '\n';
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream os(path);
    require(static_cast<bool>(os), errc::io_failure, "cannot open for writing: " + path.string());
    write(os);
  }

  static KeyValueReport read(const std::filesystem::path& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), errc::input_not_found, "input not found: " + path.string());
    KeyValueReport r;
    for (std::string line; std::getline(is, line);) {
      line = detail::trim(line);
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      require(eq != std::string::npos, errc::invalid_config, path.string() + ": malformed line '" + line + "'");
      r.entries_.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return r;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace gliorank
