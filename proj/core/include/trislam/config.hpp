#pragma once

#include <string>
#include <vector>

#include "trislam/pipeline.hpp"

namespace trislam {

/// Run configuration: every SlamConfig field plus paths, exposed as flat
/// `key = value` text. Unknown keys are rejected.
struct RunConfig {
  SlamConfig slam;
  std::string data_dir;
  std::string out_dir;
};

// All recognized keys in declaration order.
std::vector<std::string> config_keys();

// Sets one key; throws on unknown key or unparsable value.
void config_set(SlamConfig& cfg, const std::string& key, const std::string& value);
std::string config_get(const SlamConfig& cfg, const std::string& key);

// Flat config file: `key = value` lines, '#' comments, blank lines ignored.
void load_config_file(SlamConfig& cfg, const std::string& path);

// Effective configuration echo (readable back by load_config_file).
void write_config(const SlamConfig& cfg, const std::string& path);

}  // namespace trislam
