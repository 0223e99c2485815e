#include "config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace gmnmlab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

KvConfig KvConfig::parse_string(const std::string& text,
                                const std::string& origin) {
  KvConfig cfg;
  cfg.raw_ = text;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (cfg.kv_.count(key))
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": duplicate key '" + key + "'");
    cfg.kv_[key] = value;
  }
  return cfg;
}

std::string KvConfig::lookup(const std::string& key) {
  consumed_.insert(key);
  const auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigError("missing config key: " + key);
  return it->second;
}

std::string KvConfig::get_str(const std::string& key,
                              const std::string& fallback) {
  consumed_.insert(key);
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

std::string KvConfig::require_str(const std::string& key) {
  return lookup(key);
}

long KvConfig::get_long(const std::string& key, long fallback) {
  consumed_.insert(key);
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  char* end = nullptr;
  const long v = std::strtol(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0')
    throw ConfigError("config key '" + key + "' is not an integer: " +
                      it->second);
  return v;
}

double KvConfig::get_double(const std::string& key, double fallback) {
  consumed_.insert(key);
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0')
    throw ConfigError("config key '" + key + "' is not a number: " +
                      it->second);
  return v;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) {
  consumed_.insert(key);
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("config key '" + key + "' is not a bool: " + it->second);
}

std::vector<double> KvConfig::get_doubles(const std::string& key,
                                          std::vector<double> fallback) {
  consumed_.insert(key);
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<double> out;
  std::istringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    char* end = nullptr;
    out.push_back(std::strtod(tok.c_str(), &end));
    if (end == tok.c_str() || *end != '\0')
      throw ConfigError("config key '" + key + "' has a bad element: " + tok);
  }
  if (out.empty())
    throw ConfigError("config key '" + key + "' is an empty list");
  return out;
}

std::vector<long> KvConfig::get_longs(const std::string& key,
                                      std::vector<long> fallback) {
  consumed_.insert(key);
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<long> out;
  for (double v : get_doubles(key, {})) out.push_back(static_cast<long>(v));
  return out;
}

void KvConfig::finish() const {
  for (const auto& [key, value] : kv_)
    if (!consumed_.count(key))
      throw ConfigError(origin_ + ": unknown config key '" + key + "'");
}

}  // namespace gmnmlab
