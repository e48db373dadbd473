#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "con2da/data.hpp"
#include "con2da/trainer.hpp"

namespace con2da {

/// Everything one experiment needs. `train.objective` is the method and `train.seed` the
/// master seed from which every repeat derives its data and training seeds.
struct ExperimentConfig {
  std::optional<std::filesystem::path> dataset_path;  // generated from `shift` when empty
  ShiftSpec shift;
  TrainConfig train;
  std::size_t repeats = 5;
  std::filesystem::path output_dir = "runs";

  /// Throws ConfigError listing every violated constraint.
  void validate() const;
};

/// Textured-grid, five classes, three shots, moderate target shift (additive pixel noise with
/// standard deviation 0.35), T = 0.05, tau = 0.9.
ExperimentConfig default_experiment_config();

/// Flat JSON object; keys are the names listed by config_keys(). Unknown keys, wrong types
/// and out-of-range values are all collected and reported in one ConfigError.
ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         ExperimentConfig base = default_experiment_config());
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Sets one key from its textual form (as given on the command line). Lists are
/// comma-separated. Throws ConfigError for unknown keys or malformed values.
void apply_override(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Canonical flat JSON form of `cfg`; parse_experiment_config(to_json_text(c)) == c.
std::string to_json_text(const ExperimentConfig& cfg);

const std::vector<std::string>& config_keys();

}  // namespace con2da
