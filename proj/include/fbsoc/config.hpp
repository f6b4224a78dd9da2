#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "fbsoc/errors.hpp"

namespace fbsoc {

/// Sectioned key = value run configuration. Sections: problem, grid,
/// monte_carlo, policy, optimizer, output. Seeds are mandatory; there is
/// no ambient randomness anywhere.
class Config {
 public:
  static Config parse(std::istream& in) {
    Config cfg;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string s = trim(strip_comment(line));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw ConfigError("config line " + std::to_string(lineno) +
                            ": unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos || section.empty())
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": expected key = value inside a section");
      cfg.values_[section + "." + trim(s.substr(0, eq))] =
          trim(s.substr(eq + 1));
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse(in);
  }

  static Config parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  /// "section.key=value" command-line override.
  void apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || kv.find('.') == std::string::npos ||
        kv.find('.') > eq)
      throw ConfigError("override must look like section.key=value: " + kv);
    values_[trim(kv.substr(0, eq))] = trim(kv.substr(eq + 1));
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end())
      throw ConfigError("missing required config key: " + key);
    return it->second;
  }
  std::string get_str(const std::string& key, const std::string& dflt) const {
    const auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
  }

  double get_double(const std::string& key) const {
    return to_double(key, get_str(key));
  }
  double get_double(const std::string& key, double dflt) const {
    return has(key) ? get_double(key) : dflt;
  }

  long long get_int(const std::string& key) const {
    const std::string s = get_str(key);
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " is not an integer: " + s);
    }
  }
  long long get_int(const std::string& key, long long dflt) const {
    return has(key) ? get_int(key) : dflt;
  }

  std::uint64_t get_u64(const std::string& key) const {
    const long long v = get_int(key);
    if (v < 0) throw ConfigError("config key " + key + " must be >= 0");
    return static_cast<std::uint64_t>(v);
  }

  bool get_bool(const std::string& key, bool dflt) const {
    if (!has(key)) return dflt;
    const std::string s = get_str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config key " + key + " is not a boolean: " + s);
  }

  /// Comma-separated list of non-negative integers.
  std::vector<std::size_t> get_size_list(const std::string& key,
                                         std::vector<std::size_t> dflt) const {
    if (!has(key)) return dflt;
    std::vector<std::size_t> out;
    std::stringstream ss(get_str(key));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      if (tok.empty()) continue;
      try {
        out.push_back(static_cast<std::size_t>(std::stoull(tok)));
      } catch (const std::exception&) {
        throw ConfigError("config key " + key + " has a bad entry: " + tok);
      }
    }
    if (out.empty()) throw ConfigError("config key " + key + " is empty");
    return out;
  }

  /// Canonical sorted dump, used for the run manifest.
  std::string serialize() const {
    std::string cur;
    std::ostringstream out;
    for (const auto& [key, value] : values_) {
      const auto dotpos = key.find('.');
      const std::string sec = key.substr(0, dotpos);
      if (sec != cur) {
        if (!cur.empty()) out << "\n";
        out << "[" << sec << "]\n";
        cur = sec;
      }
      out << key.substr(dotpos + 1) << " = " << value << "\n";
    }
    return out.str();
  }

 private:
  static std::string strip_comment(const std::string& s) {
    const auto pos = s.find_first_of("#;");
    return pos == std::string::npos ? s : s.substr(0, pos);
  }
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }
  static double to_double(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " is not a number: " + s);
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace fbsoc
