#pragma once

#include <map>
#include <string>
#include <vector>

#include "graspfit/types.hpp"

namespace graspfit {

// Flat "key = value" text config with '#' comments. Values keep their raw
// text; typed accessors parse on demand and report the offending field.
class Config {
 public:
  Config() = default;

  static Config load(const std::string& path);
  static Config fromString(const std::string& text, const std::string& name = "<string>");

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string getString(const std::string& key) const;
  std::string getString(const std::string& key, const std::string& fallback) const;
  double getDouble(const std::string& key) const;
  double getDouble(const std::string& key, double fallback) const;
  int getInt(const std::string& key) const;
  int getInt(const std::string& key, int fallback) const;
  bool getBool(const std::string& key) const;
  bool getBool(const std::string& key, bool fallback) const;
  Vec3 getVec3(const std::string& key) const;
  Vec3 getVec3(const std::string& key, const Vec3& fallback) const;
  std::vector<double> getDoubles(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  const std::map<std::string, std::string>& values() const { return values_; }
  const std::string& name() const { return name_; }

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

  std::map<std::string, std::string> values_;
  std::string name_;
};

}  // namespace graspfit
