#include "con2da/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "con2da/errors.hpp"
#include "con2da/log.hpp"

namespace con2da {

namespace {

namespace fs = std::filesystem;

enum SeedStream : std::uint64_t { kDataStream = 11, kTrainStream = 12 };

std::string hex(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t combined_checksum(const Summary& s) {
  std::uint64_t h = 0;
  for (const RunOutcome& r : s.runs) h = mix64(h ^ r.split_checksum);
  return h;
}

void mean_std(const std::vector<double>& xs, double& mean, double& stddev) {
  mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  stddev = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
}

Record run_record(const RunOutcome& r) {
  Record rec;
  rec.add("repeat", static_cast<std::int64_t>(r.repeat))
      .add("data_seed", hex(r.data_seed))
      .add("train_seed", hex(r.train_seed))
      .add("split_checksum", hex(r.split_checksum))
      .add("best_val_acc", r.best_validation_accuracy)
      .add("target_acc", r.target_accuracy)
      .add("best_iteration", static_cast<std::int64_t>(r.best_iteration))
      .add("iterations_run", static_cast<std::int64_t>(r.iterations_run));
  return rec;
}

void write_both(const std::vector<Record>& records, const fs::path& dir, const std::string& stem) {
  emit_report(records, ReportFormat::csv, dir / (stem + ".csv"));
  emit_report(records, ReportFormat::json, dir / (stem + ".json"));
}

std::string slug(const std::string& label) {
  std::string out;
  for (char c : label) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      out += static_cast<char>(std::tolower(u));
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "run" : out;
}

std::string variant_dir_name(std::size_t index, const std::string& label) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02zu_", index);
  return buf + slug(label);
}

}  // namespace

double Summary::target_median() const {
  if (runs.empty()) throw ContractViolation("target_median: no runs");
  std::vector<double> xs;
  for (const RunOutcome& r : runs) xs.push_back(r.target_accuracy);
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

std::uint64_t repeat_data_seed(std::uint64_t master, std::size_t repeat) {
  return derive_seed(master, {kDataStream, repeat});
}

std::uint64_t repeat_train_seed(std::uint64_t master, std::size_t repeat) {
  return derive_seed(master, {kTrainStream, repeat});
}

SsdaDataset resolve_dataset(const ExperimentConfig& cfg, std::size_t repeat) {
  if (cfg.dataset_path) return load_dataset(*cfg.dataset_path);
  ShiftSpec spec = cfg.shift;
  spec.seed = repeat_data_seed(cfg.train.seed, repeat);
  return generate_synthetic_ssda(spec, cfg.train.shots);
}

Summary run_experiment(const ExperimentConfig& cfg, const std::optional<fs::path>& out_dir,
                       const std::string& label) {
  cfg.validate();
  Summary summary;
  summary.method = cfg.train.objective;
  summary.label = label.empty() ? std::string(to_string(cfg.train.objective)) : label;
  if (out_dir) fs::create_directories(*out_dir);

  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    const SsdaDataset dataset = resolve_dataset(cfg, r);
    if (dataset.shots() != cfg.train.shots) {
      log::warn("dataset holds {} shots per class, config says {}", dataset.shots(), cfg.train.shots);
    }
    TrainConfig train = cfg.train;
    train.seed = repeat_train_seed(cfg.train.seed, r);
    log::info("[{}] repeat {}/{}", summary.label, r + 1, cfg.repeats);
    const FitResult fitted = fit(dataset, train);

    RunOutcome outcome;
    outcome.repeat = r;
    outcome.data_seed = cfg.dataset_path ? 0 : repeat_data_seed(cfg.train.seed, r);
    outcome.train_seed = train.seed;
    outcome.split_checksum = dataset.checksum();
    outcome.best_validation_accuracy = fitted.report.best_validation_accuracy;
    outcome.target_accuracy = fitted.report.final_target_unlabeled_accuracy;
    outcome.best_iteration = fitted.report.best_iteration;
    outcome.iterations_run = fitted.report.records.size();
    summary.runs.push_back(outcome);

    if (out_dir) {
      const fs::path dir = *out_dir / ("seed_" + std::to_string(r));
      fs::create_directories(dir);
      write_metrics_csv(fitted.report, dir / "metrics.csv");
      emit_report({run_record(outcome)}, ReportFormat::json, dir / "run.json");
    }
  }

  std::vector<double> target, validation;
  for (const RunOutcome& r : summary.runs) {
    target.push_back(r.target_accuracy);
    validation.push_back(r.best_validation_accuracy);
  }
  mean_std(target, summary.target_mean, summary.target_std);
  mean_std(validation, summary.validation_mean, summary.validation_std);
  if (out_dir) write_both({summary_record(summary)}, *out_dir, "summary");
  log::info("[{}] target accuracy {:.4f} +- {:.4f}", summary.label, summary.target_mean, summary.target_std);
  return summary;
}

Record summary_record(const Summary& s) {
  Record rec;
  rec.add("label", s.label)
      .add("method", std::string(to_string(s.method)))
      .add("repeats", static_cast<std::int64_t>(s.runs.size()))
      .add("val_acc_mean", s.validation_mean)
      .add("val_acc_std", s.validation_std)
      .add("target_acc_mean", s.target_mean)
      .add("target_acc_std", s.target_std)
      .add("split_checksum", hex(combined_checksum(s)));
  return rec;
}

std::vector<Summary> run_ablation(const ExperimentConfig& base, const std::optional<fs::path>& out_dir) {
  base.validate();
  if (base.train.objective != Objective::con2da) {
    throw ConfigError("ablation requires method con2da");
  }
  std::vector<ExperimentConfig> variants(4, base);
  variants[0].train.disable_contrastive = false;
  variants[0].train.disable_self_supervised = false;
  variants[0].train.cosine_classifier = false;
  for (std::size_t i = 1; i < 4; ++i) variants[i] = variants[0];
  variants[1].train.disable_contrastive = true;
  variants[2].train.disable_self_supervised = true;
  variants[3].train.cosine_classifier = true;

  std::vector<Summary> rows;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    std::optional<fs::path> dir;
    if (out_dir) dir = *out_dir / variant_dir_name(i, kAblationLabels[i]);
    rows.push_back(run_experiment(variants[i], dir, kAblationLabels[i]));
  }
  if (out_dir) {
    std::vector<Record> records;
    for (const Summary& s : rows) records.push_back(summary_record(s));
    write_both(records, *out_dir, "summary");
  }
  return rows;
}

void SweepSpec::validate() const {
  std::vector<std::string> errors;
  if (temperatures.empty()) errors.push_back("temperature grid is empty");
  if (thresholds.empty()) errors.push_back("threshold grid is empty");
  for (double t : temperatures) {
    if (!(t > 0.0)) errors.push_back("temperature " + format_number(t) + " must be > 0");
  }
  for (double tau : thresholds) {
    if (!(tau > 0.0 && tau <= 1.0)) errors.push_back("threshold " + format_number(tau) + " must lie in (0, 1]");
  }
  if (!errors.empty()) {
    std::string msg = "invalid sweep:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
}

SweepResult run_sweep(const ExperimentConfig& base, const SweepSpec& sweep, const std::optional<fs::path>& out_dir) {
  base.validate();
  sweep.validate();
  SweepResult result;
  for (double t : sweep.temperatures) {
    for (double tau : sweep.thresholds) {
      ExperimentConfig cfg = base;
      cfg.train.temperature = t;
      cfg.train.threshold = tau;
      const std::string label = "T=" + format_number(t) + " tau=" + format_number(tau);
      std::optional<fs::path> dir;
      if (out_dir) dir = *out_dir / "cells" / variant_dir_name(result.cells.size(), label);
      result.cells.push_back({t, tau, run_experiment(cfg, dir, label)});
    }
  }
  // Selection reads validation accuracy only.
  for (std::size_t i = 1; i < result.cells.size(); ++i) {
    const SweepCell& c = result.cells[i];
    const SweepCell& best = result.cells[result.selected];
    const double a = c.summary.validation_mean, b = best.summary.validation_mean;
    const bool better = a > b || (a == b && (c.temperature < best.temperature ||
                                             (c.temperature == best.temperature && c.threshold < best.threshold)));
    if (better) result.selected = i;
  }
  if (out_dir) {
    write_both(sweep_records(result), *out_dir, "summary");
    const SweepCell& best = result.cells[result.selected];
    write_both({sweep_records(result)[result.selected]}, *out_dir, "selected");
    log::info("sweep selected T={} tau={} (val {:.4f})", best.temperature, best.threshold,
              best.summary.validation_mean);
  }
  return result;
}

std::vector<Record> sweep_records(const SweepResult& result) {
  std::vector<Record> records;
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const SweepCell& c = result.cells[i];
    Record rec;
    rec.add("T", c.temperature)
        .add("tau", c.threshold)
        .add("val_acc", c.summary.validation_mean)
        .add("test_acc", c.summary.target_mean)
        .add("val_acc_std", c.summary.validation_std)
        .add("test_acc_std", c.summary.target_std)
        .add("selected", static_cast<std::int64_t>(i == result.selected ? 1 : 0));
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<PolicyRow> run_augmentation_study(const ExperimentConfig& base,
                                              const std::vector<std::set<StrongExtra>>& policies,
                                              const std::optional<fs::path>& out_dir) {
  base.validate();
  std::vector<std::set<StrongExtra>> unique{{}};
  std::vector<std::set<StrongExtra>> seen;
  for (const auto& p : policies) {
    if (std::find(seen.begin(), seen.end(), p) != seen.end()) {
      log::warn("augmentation study: dropping duplicate policy '{}'", strong_extras_label(p));
      continue;
    }
    seen.push_back(p);
    if (!p.empty()) unique.push_back(p);
  }
  std::vector<PolicyRow> rows;
  for (std::size_t i = 0; i < unique.size(); ++i) {
    ExperimentConfig cfg = base;
    cfg.train.augment.strong_extras = unique[i];
    const std::string label = strong_extras_label(unique[i]);
    std::optional<fs::path> dir;
    if (out_dir) dir = *out_dir / variant_dir_name(i, label);
    rows.push_back({unique[i], run_experiment(cfg, dir, label)});
  }
  if (out_dir) write_both(policy_records(rows), *out_dir, "summary");
  return rows;
}

std::vector<Record> policy_records(const std::vector<PolicyRow>& rows) {
  std::vector<Record> records;
  for (const PolicyRow& row : rows) {
    Record rec;
    rec.add("policy", strong_extras_label(row.extras))
        .add("val_acc", row.summary.validation_mean)
        .add("test_acc", row.summary.target_mean)
        .add("val_acc_std", row.summary.validation_std)
        .add("test_acc_std", row.summary.target_std)
        .add("split_checksum", hex(combined_checksum(row.summary)));
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace con2da
