#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "error.hpp"

namespace gmnmlab {

// Flat `key = value` config text with dotted section keys, '#' comments and
// blank lines. Every key must be consumed by the reader; leftovers are
// parse errors so typos cannot silently change an experiment.
class KvConfig {
 public:
  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_string(const std::string& text,
                               const std::string& origin = "<string>");

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  std::string get_str(const std::string& key, const std::string& fallback);
  std::string require_str(const std::string& key);
  long get_long(const std::string& key, long fallback);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<double> get_doubles(const std::string& key,
                                  std::vector<double> fallback);
  std::vector<long> get_longs(const std::string& key,
                              std::vector<long> fallback);

  // Throws ConfigError when a key was never read.
  void finish() const;

  const std::string& raw_text() const { return raw_; }
  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::string lookup(const std::string& key);
  std::map<std::string, std::string> kv_;
  std::set<std::string> consumed_;
  std::string raw_;
  std::string origin_;
};

}  // namespace gmnmlab
