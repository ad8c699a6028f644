// pmtl/io/kv_config.hpp

// Copyright 2026  The pmtl Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "pmtl/common.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <type_traits>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace pmtl {

/// Flat `key = value` configuration with `#` comments. Readers mark the keys
/// they consume so that leftovers can be rejected as unknown.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<text>") {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ValidationError(origin + ":" + std::to_string(lineno) + ": empty key");
      cfg.set(key, value);
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  void set(const std::string& key, const std::string& value) {
    auto it = index_.find(key);
    if (it == index_.end()) {
      index_[key] = entries_.size();
      entries_.emplace_back(key, value);
    } else {
      entries_[it->second].second = value;
    }
  }

  bool has(const std::string& key) const { return index_.count(key) != 0; }

  /// Returns the raw value and marks the key as consumed.
  std::optional<std::string> take(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    used_.insert(key);
    return entries_[it->second].second;
  }

  void take_into(const std::string& key, std::string& out) const {
    if (auto v = take(key)) out = *v;
  }
  void take_into(const std::string& key, double& out) const {
    if (auto v = take(key)) out = parse_real(*v);
  }
  void take_into(const std::string& key, bool& out) const {
    if (auto v = take(key)) {
      if (*v == "true" || *v == "1") out = true;
      else if (*v == "false" || *v == "0") out = false;
      else throw ValidationError("key '" + key + "': expected true/false, got '" + *v + "'");
    }
  }
  template <class Int>
    requires std::is_integral_v<Int>
  void take_into(const std::string& key, Int& out) const {
    if (auto v = take(key)) {
      long long parsed = parse_int(*v);
      if (std::is_unsigned_v<Int> && parsed < 0) throw ValidationError("key '" + key + "' must be nonnegative");
      out = static_cast<Int>(parsed);
    }
  }

  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

  void reject_unknown() const {
    auto unused = unused_keys();
    if (!unused.empty()) throw ValidationError("unknown configuration key '" + unused.front() + "'");
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string to_text() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
  }

  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
  mutable std::set<std::string> used_;
};

}  // namespace pmtl
