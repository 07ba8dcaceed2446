#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "procbench/error.hpp"

namespace procbench {

using Json = nlohmann::json;

// Reads optional overrides from a JSON object and remembers which keys were
// consumed, so a typo in a config file becomes a ConfigError instead of being
// ignored silently.
class ConfigReader {
 public:
  ConfigReader(const Json& obj, std::string path);

  bool has(const std::string& key) const;

  void read(const std::string& key, double& value);
  void read(const std::string& key, int& value);
  void read(const std::string& key, std::size_t& value);
  void read(const std::string& key, bool& value);
  void read(const std::string& key, std::string& value);
  void read(const std::string& key, std::vector<double>& value);
  // Fixed-length vector: the override must have the same length as value.
  void read_exact(const std::string& key, std::vector<double>& value);

  // Sub-object (empty if absent).
  ConfigReader child(const std::string& key);

  // Throws ConfigError naming the first key never read.
  void finish() const;

 private:
  const Json* lookup(const std::string& key);
  [[noreturn]] void fail(const std::string& key, const std::string& why) const;

  Json obj_;
  std::string path_;
  std::set<std::string> used_;
};

Json load_json_file(const std::string& path);

}  // namespace procbench
