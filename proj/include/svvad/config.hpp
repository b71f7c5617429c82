#pragma once

#include <map>
#include <string>

namespace svvad {

// Flat key=value configuration with '#' comments; unknown keys are rejected
// only by the consumers that care.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get(const std::string& key, double fallback) const;
  size_t get(const std::string& key, size_t fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  bool get(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

// The shipped defaults: desk-scale values active, the reported full-scale
// values present as comments next to each key.
std::string default_config_text();

}  // namespace svvad
