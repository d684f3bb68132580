// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/config_file.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "m3i/error.hpp"

namespace m3i {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigInvalid("cannot open config file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_text(ss.str(), path);
}

ConfigFile ConfigFile::parse_text(const std::string& text, const std::string& origin) {
  ConfigFile cfg;
  std::istringstream is(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigInvalid(origin + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty())
        throw ConfigInvalid(origin + ":" + std::to_string(lineno) + ": empty section name");
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigInvalid(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigInvalid(origin + ":" + std::to_string(lineno) + ": empty key");
    std::string full = section.empty() ? key : section + "." + key;
    if (cfg.values_.count(full))
      throw ConfigInvalid(origin + ":" + std::to_string(lineno) + ": duplicate key '" + full + "'");
    cfg.values_[full] = value;
  }
  return cfg;
}

std::string ConfigFile::get_str(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string ConfigFile::require_str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigInvalid("missing required key '" + key + "'");
  return it->second;
}

double ConfigFile::get_f64(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  char* end = nullptr;
  double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0')
    throw ConfigInvalid("key '" + key + "' is not a number: " + it->second);
  return v;
}

int64_t ConfigFile::get_i64(const std::string& key, int64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  char* end = nullptr;
  long long v = std::strtoll(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0')
    throw ConfigInvalid("key '" + key + "' is not an integer: " + it->second);
  return v;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigInvalid("key '" + key + "' is not a boolean: " + v);
}

std::vector<std::string> ConfigFile::keys() const {
  std::vector<std::string> out;
  out.reserve(values_.size());
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

}  // namespace m3i
