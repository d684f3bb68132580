// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace m3i {

// Line-oriented "key = value" files with [section] headers.
// Keys are stored as "section.key". Lines starting with '#' are comments.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_text(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_str(const std::string& key, const std::string& fallback) const;
  std::string require_str(const std::string& key) const;
  double get_f64(const std::string& key, double fallback) const;
  int64_t get_i64(const std::string& key, int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Keys present in the file. Used to reject unknown keys against a schema.
  std::vector<std::string> keys() const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace m3i
