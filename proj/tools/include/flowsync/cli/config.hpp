#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "flowsync/facegen.hpp"
#include "flowsync/guidance.hpp"
#include "flowsync/sampler.hpp"
#include "flowsync/training.hpp"

namespace flowsync::cli {

/// Flat `section.key = value` configuration. Every key has a default; unknown keys
/// and unparsable values raise ConfigError naming the key.
class RunConfig {
 public:
  RunConfig();

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  /// Sets one key from text (validated against the key's type).
  void set(const std::string& key, const std::string& value);
  /// "key=value" form used by --set.
  void set_assignment(const std::string& assignment);

  const std::string& raw(const std::string& key) const;
  double number(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  bool flag(const std::string& key) const;

  /// Every key in schema order, one `key = value` line each.
  std::string serialize() const;

  static const std::vector<std::string>& keys();

 private:
  std::map<std::string, std::string> values_;
};

FacegenConfig facegen_config(const RunConfig& c);
TrainConfig train_config(const RunConfig& c);
/// Sampler settings; the spatial guidance profile is built for `spec`'s mouth.
SamplerConfig sampler_config(const RunConfig& c, const FaceSpec& spec);

}  // namespace flowsync::cli
