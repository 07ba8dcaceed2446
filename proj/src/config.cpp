#include "procbench/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace procbench {

ConfigReader::ConfigReader(const Json& obj, std::string path) : path_(std::move(path)) {
  if (obj.is_null()) {
    obj_ = Json::object();
  } else if (obj.is_object()) {
    obj_ = obj;
  } else {
    throw Error(Errc::ConfigError, (path_.empty() ? std::string("config") : path_) + " must be an object");
  }
}

bool ConfigReader::has(const std::string& key) const { return obj_.contains(key); }

void ConfigReader::fail(const std::string& key, const std::string& why) const {
  const std::string where = path_.empty() ? key : path_ + "." + key;
  throw Error(Errc::ConfigError, where + ": " + why);
}

const Json* ConfigReader::lookup(const std::string& key) {
  auto it = obj_.find(key);
  if (it == obj_.end()) return nullptr;
  used_.insert(key);
  return &*it;
}

void ConfigReader::read(const std::string& key, double& value) {
  const Json* j = lookup(key);
  if (!j) return;
  if (!j->is_number()) fail(key, "expected a number");
  value = j->get<double>();
  if (!std::isfinite(value)) fail(key, "must be finite");
}

void ConfigReader::read(const std::string& key, int& value) {
  const Json* j = lookup(key);
  if (!j) return;
  if (!j->is_number_integer()) fail(key, "expected an integer");
  value = j->get<int>();
}

void ConfigReader::read(const std::string& key, std::size_t& value) {
  const Json* j = lookup(key);
  if (!j) return;
  if (!j->is_number_integer() || j->get<long long>() < 0) fail(key, "expected a nonnegative integer");
  value = j->get<std::size_t>();
}

void ConfigReader::read(const std::string& key, bool& value) {
  const Json* j = lookup(key);
  if (!j) return;
  if (!j->is_boolean()) fail(key, "expected true or false");
  value = j->get<bool>();
}

void ConfigReader::read(const std::string& key, std::string& value) {
  const Json* j = lookup(key);
  if (!j) return;
  if (!j->is_string()) fail(key, "expected a string");
  value = j->get<std::string>();
}

void ConfigReader::read(const std::string& key, std::vector<double>& value) {
  const Json* j = lookup(key);
  if (!j) return;
  if (!j->is_array()) fail(key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : *j) {
    if (!e.is_number()) fail(key, "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  value = std::move(out);
}

void ConfigReader::read_exact(const std::string& key, std::vector<double>& value) {
  const std::size_t n = value.size();
  read(key, value);
  if (value.size() != n) fail(key, "expected " + std::to_string(n) + " values");
}

ConfigReader ConfigReader::child(const std::string& key) {
  const Json* j = lookup(key);
  const std::string sub = path_.empty() ? key : path_ + "." + key;
  if (!j) return ConfigReader(Json::object(), sub);
  if (!j->is_object()) fail(key, "expected an object");
  return ConfigReader(*j, sub);
}

void ConfigReader::finish() const {
  for (auto it = obj_.begin(); it != obj_.end(); ++it) {
    if (!used_.count(it.key())) fail(it.key(), "unknown key");
  }
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return Json::parse(buf.str());
  } catch (const Json::parse_error& e) {
    throw Error(Errc::ConfigError, path + ": " + e.what());
  }
}

}  // namespace procbench
