#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "accuracytrader/common.hpp"

namespace atr {

// Flat `key = value` configuration file. Blank lines and lines starting with
// '#' are ignored. Consumers read typed values with defaults; after reading
// everything they call require_all_consumed(), which rejects unknown keys so
// misspelled settings fail loudly instead of silently using defaults.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig from_file(const std::string& path);
  static KvConfig from_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback);
  std::string require_string(const std::string& key);
  std::int64_t get_i64(const std::string& key, std::int64_t fallback);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  // Comma-separated list; empty value -> empty list.
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback);
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback);

  void require_all_consumed() const;

  const std::string& origin() const { return origin_; }

 private:
  std::string raw(const std::string& key);

  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
  std::string origin_;
};

}  // namespace atr
