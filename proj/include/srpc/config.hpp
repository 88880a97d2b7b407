#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "srpc/data.hpp"

namespace srpc {

// Minimal TOML subset: [section] headers, key = value lines, '#' comments,
// quoted strings, numbers, booleans and flat arrays "[1, 2, 3]".
class Config {
 public:
  Config() = default;
  static Config parse(const std::string& text);
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  // Keys are "section.name" (or just "name" before any section header).
  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<long> get_int(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;
  std::optional<std::vector<double>> get_doubles(const std::string& key) const;
  std::optional<std::vector<long>> get_ints(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;

  // Throws ConfigError naming the first key outside `known`.
  void require_known(const std::set<std::string>& known) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Readers for the [prior], [chain] and [data] sections. Missing keys keep
// their defaults.
Hyperparameters hyperparameters_from(const Config& cfg, Hyperparameters base = {});
ChainConfig chain_config_from(const Config& cfg, ChainConfig base = {});
Schema schema_from(const Config& cfg, Schema base = {});
LoadOptions load_options_from(const Config& cfg);

}  // namespace srpc
