#include "graspfit/config.hpp"

#include <fstream>
#include <sstream>

#include "graspfit/errors.hpp"

namespace graspfit {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return fromString(buf.str(), path);
}

Config Config::fromString(const std::string& text, const std::string& name) {
  Config cfg;
  cfg.name_ = name;
  std::istringstream in(text);
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream msg;
      msg << name << ":" << lineNo << ": expected 'key = value'";
      throw ParseError(msg.str());
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      std::ostringstream msg;
      msg << name << ":" << lineNo << ": empty key";
      throw ParseError(msg.str());
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

void Config::fail(const std::string& key, const std::string& what) const {
  throw ParseError(name_ + ": field '" + key + "': " + what);
}

std::string Config::getString(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) fail(key, "missing");
  return it->second;
}

std::string Config::getString(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::getDouble(const std::string& key) const {
  const std::string s = getString(key);
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) fail(key, "trailing characters in number '" + s + "'");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    fail(key, "not a number: '" + s + "'");
  }
}

double Config::getDouble(const std::string& key, double fallback) const {
  return has(key) ? getDouble(key) : fallback;
}

int Config::getInt(const std::string& key) const {
  const std::string s = getString(key);
  try {
    size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) fail(key, "trailing characters in integer '" + s + "'");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    fail(key, "not an integer: '" + s + "'");
  }
}

int Config::getInt(const std::string& key, int fallback) const {
  return has(key) ? getInt(key) : fallback;
}

bool Config::getBool(const std::string& key) const {
  const std::string s = getString(key);
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  fail(key, "not a boolean: '" + s + "'");
}

bool Config::getBool(const std::string& key, bool fallback) const {
  return has(key) ? getBool(key) : fallback;
}

Vec3 Config::getVec3(const std::string& key) const {
  const auto v = getDoubles(key);
  if (v.size() != 3) fail(key, "expected 3 numbers");
  return {v[0], v[1], v[2]};
}

Vec3 Config::getVec3(const std::string& key, const Vec3& fallback) const {
  return has(key) ? getVec3(key) : fallback;
}

std::vector<double> Config::getDoubles(const std::string& key) const {
  std::istringstream ss(getString(key));
  std::vector<double> out;
  double v;
  while (ss >> v) out.push_back(v);
  if (!ss.eof()) fail(key, "not a list of numbers");
  return out;
}

}  // namespace graspfit
