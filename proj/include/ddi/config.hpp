#pragma once

#include <string>
#include <vector>

#include "ddi/infer.hpp"
#include "ddi/model.hpp"
#include "ddi/train.hpp"

// The operator-facing configuration file: a versioned list of flat
// `key = value` lines. Unknown keys, duplicates and malformed values are
// errors. Lists are comma-separated.
namespace ddi::cli {

inline constexpr std::string_view kConfigVersion = "ddi-config/1";

struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  infer::InferConfig infer;
  train::BootstrapConfig bootstrap;
  std::size_t ensemble_size = 10;
  std::size_t min_votes = 1;
  std::size_t workers = 1;

  /// Copies settings shared between sections (class proxies) and checks every section.
  void finalize();
};

/// Every key with its current value, in file order.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config);
std::vector<std::string> config_keys();

/// Sets one key; throws UsageError on an unknown key or a malformed value.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
/// `key=value` form used by `--set`.
void apply_override(RunConfig& config, const std::string& assignment);

/// Parses a config file over the defaults. Throws ParseError with the line
/// number on any problem.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Canonical text of a config; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

}  // namespace ddi::cli
