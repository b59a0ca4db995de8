#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>

#include "errors.hpp"

namespace gcanfuse {

/// Line-based `key = value` text with `#` comments.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in, const std::string& origin = "<config>") {
    KeyValues kv;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw UsageError(origin + ":" + std::to_string(n) + ": expected 'key = value'");
      std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw UsageError(origin + ":" + std::to_string(n) + ": empty key");
      kv.values_[key] = trim(line.substr(eq + 1));
    }
    return kv;
  }

  static KeyValues parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config " + path);
    return parse(in, path);
  }

  bool has(const std::string& k) const { return values_.count(k) != 0; }

  std::string get(const std::string& k, const std::string& fallback) const {
    auto it = values_.find(k);
    return it == values_.end() ? fallback : it->second;
  }

  double get(const std::string& k, double fallback) const {
    auto it = values_.find(k);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(k);
      return v;
    } catch (const std::exception&) {
      throw UsageError("config key '" + k + "' is not a number: " + it->second);
    }
  }

  std::uint64_t get(const std::string& k, std::uint64_t fallback) const {
    auto it = values_.find(k);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      auto v = std::stoull(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(k);
      return v;
    } catch (const std::exception&) {
      throw UsageError("config key '" + k + "' is not a non-negative integer: " + it->second);
    }
  }

  std::size_t get_size(const std::string& k, std::size_t fallback) const {
    return static_cast<std::size_t>(get(k, static_cast<std::uint64_t>(fallback)));
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace gcanfuse
