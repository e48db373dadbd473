#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "con2da/config.hpp"
#include "con2da/report.hpp"

namespace con2da {

struct RunOutcome {
  std::size_t repeat = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t train_seed = 0;
  std::uint64_t split_checksum = 0;
  double best_validation_accuracy = 0.0;
  double target_accuracy = 0.0;  // final accuracy on the revealed target_unlabeled split
  std::uint64_t best_iteration = 0;
  std::uint64_t iterations_run = 0;
};

struct Summary {
  std::string label;
  Objective method = Objective::con2da;
  std::vector<RunOutcome> runs;
  double target_mean = 0.0;
  double target_std = 0.0;  // sample standard deviation, 0 for a single run
  double validation_mean = 0.0;
  double validation_std = 0.0;

  double target_median() const;
};

/// Seeds of repeat r, derived from the master seed; identical across harness variants.
std::uint64_t repeat_data_seed(std::uint64_t master, std::size_t repeat);
std::uint64_t repeat_train_seed(std::uint64_t master, std::size_t repeat);

/// Builds the dataset of repeat r: the configured file, or the generator with the repeat's
/// data seed.
SsdaDataset resolve_dataset(const ExperimentConfig& cfg, std::size_t repeat);

/// Runs cfg.repeats fits of cfg.train.objective. With `out_dir`, writes
/// seed_<r>/metrics.csv, seed_<r>/run.json and summary.{csv,json}.
/// The configuration is validated before anything runs.
Summary run_experiment(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& out_dir,
                       const std::string& label = {});

inline constexpr const char* kAblationLabels[4] = {"Con²DA", "w/o L_cont", "w/o L_self", "w cosine"};

/// Full method, without the contrastive loss, without the self-supervised loss and with a
/// unit-normalized classifier, all on the same splits and seeds.
std::vector<Summary> run_ablation(const ExperimentConfig& base, const std::optional<std::filesystem::path>& out_dir);

struct SweepSpec {
  std::vector<double> temperatures{0.01, 0.05, 0.07, 0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<double> thresholds{0.8, 0.9, 0.95};

  void validate() const;
};

struct SweepCell {
  double temperature = 0.0;
  double threshold = 0.0;
  Summary summary;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // temperature-major, grid order
  std::size_t selected = 0;      // best mean validation accuracy; ties to lower T, then lower tau
};

SweepResult run_sweep(const ExperimentConfig& base, const SweepSpec& sweep,
                      const std::optional<std::filesystem::path>& out_dir);

struct PolicyRow {
  std::set<StrongExtra> extras;
  Summary summary;
};

/// Evaluates each strong-augmentation set. The weak-only (empty) set is always included and
/// listed first; duplicate sets are dropped with a warning.
std::vector<PolicyRow> run_augmentation_study(const ExperimentConfig& base,
                                              const std::vector<std::set<StrongExtra>>& policies,
                                              const std::optional<std::filesystem::path>& out_dir);

/// Report rows for the harness outputs.
Record summary_record(const Summary& s);
std::vector<Record> sweep_records(const SweepResult& result);
std::vector<Record> policy_records(const std::vector<PolicyRow>& rows);

}  // namespace con2da
