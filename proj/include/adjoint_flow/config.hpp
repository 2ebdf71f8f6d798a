#pragma once

// INI-style configuration: `[section]` headers, `key = value` lines,
// `#` or `;` comments. Keys are addressed as "section.key".

#include <algorithm>
#include <cerrno>
#include <cstddef>
#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "adjoint_flow/errors.hpp"
#include "adjoint_flow/io.hpp"

namespace adjoint_flow {

struct KeySpec {
  std::string key;
  std::optional<std::string> default_value;  ///< nullopt: required
  std::string help;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

}  // namespace detail

/// Raw key/value pairs in file order of first appearance.
inline std::map<std::string, std::string> parse_ini(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "' outside a section");
    out[section + "." + key] = detail::trim(line.substr(eq + 1));
  }
  return out;
}

class Config {
 public:
  Config(std::vector<KeySpec> schema, std::map<std::string, std::string> raw,
         const std::vector<std::string>& required_extra = {})
      : schema_(std::move(schema)) {
    std::vector<std::string> unknown;
    for (const auto& [k, v] : raw)
      if (!find(k)) unknown.push_back(k);
    if (!unknown.empty()) throw ConfigError("unknown config keys: " + detail::join(unknown, ", "));
    std::vector<std::string> missing;
    for (const KeySpec& s : schema_) {
      auto it = raw.find(s.key);
      const bool required = !s.default_value ||
                            std::find(required_extra.begin(), required_extra.end(), s.key) != required_extra.end();
      if (it != raw.end())
        values_[s.key] = it->second;
      else if (required)
        missing.push_back(s.key);
      else
        values_[s.key] = *s.default_value;
    }
    if (!missing.empty()) throw ConfigError("missing required config keys: " + detail::join(missing, ", "));
  }

  static Config from_text(std::vector<KeySpec> schema, const std::string& text,
                          const std::vector<std::string>& overrides = {},
                          const std::vector<std::string>& required_extra = {}) {
    auto raw = parse_ini(text);
    for (const std::string& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
      raw[detail::trim(o.substr(0, eq))] = detail::trim(o.substr(eq + 1));
    }
    return Config(std::move(schema), std::move(raw), required_extra);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("config key '" + key + "' is not in the schema");
    return it->second;
  }

  double number(const std::string& key) const { return parse_number(key, str(key)); }

  std::size_t count(const std::string& key) const {
    const double v = number(key);
    if (v < 0.0 || v != static_cast<double>(static_cast<std::size_t>(v)))
      throw ConfigError("config key '" + key + "' must be a non-negative integer");
    return static_cast<std::size_t>(v);
  }

  bool flag(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "' must be a boolean, got '" + v + "'");
  }

  /// Comma-separated numbers; empty string gives an empty list.
  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    std::istringstream in(str(key));
    std::string item;
    while (std::getline(in, item, ',')) {
      item = detail::trim(item);
      if (item.empty()) continue;
      out.push_back(parse_number(key, item));
    }
    return out;
  }

  /// Defaults-resolved INI text in schema order; parsing it back gives the same config.
  std::string effective_text() const {
    std::string out, section;
    for (const KeySpec& s : schema_) {
      const auto dot = s.key.find('.');
      const std::string sec = s.key.substr(0, dot);
      if (sec != section) {
        out += (out.empty() ? "" : "\n") + std::string("[") + sec + "]\n";
        section = sec;
      }
      out += s.key.substr(dot + 1) + " = " + values_.at(s.key) + "\n";
    }
    return out;
  }

  const std::vector<KeySpec>& schema() const noexcept { return schema_; }

 private:
  const KeySpec* find(const std::string& key) const {
    for (const KeySpec& s : schema_)
      if (s.key == key) return &s;
    return nullptr;
  }

  static double parse_number(const std::string& key, const std::string& v) {
    const char* begin = v.c_str();
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(begin, &end);
    if (v.empty() || end != begin + v.size() || errno == ERANGE)
      throw ConfigError("config key '" + key + "' must be a number, got '" + v + "'");
    return x;
  }

  std::vector<KeySpec> schema_;
  std::map<std::string, std::string> values_;
};

}  // namespace adjoint_flow
