#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lqrrl/common.hpp"

namespace lqrrl {

// Line-oriented `key = value` configuration with '#' comments and dotted
// keys (env.tau, agent.epsilon). Reads are tracked so a finished setup can
// reject keys nothing consumed — the cheapest possible typo detector.
class ConfigMap {
 public:
  ConfigMap() = default;

  static ConfigMap parse_text(const std::string& text) {
    ConfigMap cfg;
    std::istringstream stream(text);
    std::string line;
    int line_no = 0;
    while (std::getline(stream, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static ConfigMap parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_text(buffer.str());
  }

  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }

  bool has(const std::string& key) const {
    return values_.count(key) != 0;
  }

  std::string get_string(const std::string& key,
                         const std::string& fallback) const {
    accessed_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    accessed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_double(key, it->second);
  }

  int get_int(const std::string& key, int fallback) const {
    const double v = get_double(key, double(fallback));
    const int i = int(v);
    if (double(i) != v)
      throw ConfigError("config key " + key + ": expected an integer");
    return i;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    accessed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("config key " + key + ": expected true/false");
  }

  std::vector<int> get_int_list(const std::string& key,
                                std::vector<int> fallback) const {
    accessed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<int> out;
    std::stringstream stream(it->second);
    for (std::string tok; std::getline(stream, tok, ',');) {
      const double v = parse_double(key, trim(tok));
      out.push_back(int(v));
    }
    if (out.empty())
      throw ConfigError("config key " + key + ": empty list");
    return out;
  }

  std::vector<double> get_double_list(const std::string& key,
                                      std::vector<double> fallback) const {
    accessed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::stringstream stream(it->second);
    for (std::string tok; std::getline(stream, tok, ',');)
      out.push_back(parse_double(key, trim(tok)));
    if (out.empty())
      throw ConfigError("config key " + key + ": empty list");
    return out;
  }

  std::vector<std::string> unused_keys() const {
    std::vector<std::string> unused;
    for (const auto& [key, value] : values_)
      if (!accessed_.count(key)) unused.push_back(key);
    return unused;
  }

  void require_all_used() const {
    const auto unused = unused_keys();
    if (unused.empty()) return;
    std::string msg = "unknown config keys:";
    for (const auto& key : unused) msg += " " + key;
    throw ConfigError(msg);
  }

 private:
  static std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
  }

  static double parse_double(const std::string& key, const std::string& text) {
    try {
      size_t consumed = 0;
      const double v = std::stod(text, &consumed);
      if (consumed != text.size())
        throw ConfigError("config key " + key + ": bad number '" + text + "'");
      return v;
    } catch (const std::invalid_argument&) {
      throw ConfigError("config key " + key + ": bad number '" + text + "'");
    } catch (const std::out_of_range&) {
      throw ConfigError("config key " + key + ": number out of range");
    }
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> accessed_;
};

}  // namespace lqrrl
