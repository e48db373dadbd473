#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "con2da/config.hpp"
#include "con2da/errors.hpp"
#include "con2da/experiments.hpp"
#include "con2da/log.hpp"

namespace fs = std::filesystem;
using namespace con2da;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "Flat JSON experiment config");
  cmd->add_option("--set", opts.overrides, "Override one config key, KEY=VALUE (repeatable)");
  cmd->add_option("--seed", opts.seed, "Master seed");
  cmd->add_option("--out", opts.out, "Output directory");
}

ExperimentConfig resolve_config(const CommonOptions& opts) {
  ExperimentConfig cfg =
      opts.config_path.empty() ? default_experiment_config() : load_experiment_config(opts.config_path);
  for (const std::string& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed) cfg.train.seed = *opts.seed;
  if (!opts.out.empty()) cfg.output_dir = opts.out;
  cfg.validate();
  return cfg;
}

void write_resolved_config(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  std::FILE* f = std::fopen((cfg.output_dir / "config.json").c_str(), "wb");
  if (!f) throw IoError("cannot write '" + (cfg.output_dir / "config.json").string() + "'");
  const std::string text = to_json_text(cfg);
  std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
}

std::vector<double> parse_grid(const std::string& text, const char* name) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string(name) + ": '" + item + "' is not a number");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// "weak_only" or extras joined with '+'.
std::set<StrongExtra> parse_policy(const std::string& text) {
  std::set<StrongExtra> extras;
  if (text == "weak_only" || text.empty()) return extras;
  std::size_t start = 0;
  while (true) {
    const auto plus = text.find('+', start);
    const std::string name = text.substr(start, plus == std::string::npos ? std::string::npos : plus - start);
    const auto e = parse_strong_extra(name);
    if (!e) throw ConfigError("unknown strong augmentation '" + name + "'");
    extras.insert(*e);
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  return extras;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised domain adaptation with contrastive and self-supervised losses"};
  app.require_subcommand(1);

  ShiftSpec gen;
  std::size_t gen_shots = 3;
  std::string gen_out, gen_generator = "textured_grid", gen_shift = "rotation";
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic SSDA dataset file");
  gen_cmd->add_option("--generator", gen_generator, "two_moons | gaussian_blobs | textured_grid");
  gen_cmd->add_option("--num-classes", gen.num_classes, "Number of classes K");
  gen_cmd->add_option("--samples-per-domain", gen.samples_per_domain, "Samples per domain");
  gen_cmd->add_option("--shift-kind", gen_shift, "rotation | translation | channel_swap | noise");
  gen_cmd->add_option("--shift-magnitude", gen.shift_magnitude, "Shift magnitude (degrees, pixels, fraction or std-dev)");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--shots", gen_shots, "Labeled target samples per class");
  gen_cmd->add_option("--channels", gen.channels, "Image channels");
  gen_cmd->add_option("--height", gen.height, "Image height");
  gen_cmd->add_option("--width", gen.width, "Image width");
  gen_cmd->add_option("--out", gen_out, "Output file")->required();

  CommonOptions train_opts;
  std::string method;
  auto* train_cmd = app.add_subcommand("train", "Train one method over the configured repeats");
  add_common(train_cmd, train_opts);
  train_cmd->add_option("--method", method, "con2da | s_plus_t | ent");

  CommonOptions ablation_opts;
  auto* ablation_cmd = app.add_subcommand("ablation", "Run the four-row loss ablation");
  add_common(ablation_cmd, ablation_opts);

  CommonOptions sweep_opts;
  std::string t_grid, tau_grid;
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid search over temperature and threshold");
  add_common(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--t-grid", t_grid, "Comma-separated temperatures");
  sweep_cmd->add_option("--tau-grid", tau_grid, "Comma-separated thresholds");

  CommonOptions aug_opts;
  std::vector<std::string> policies;
  auto* aug_cmd = app.add_subcommand("aug-study", "Compare strong-augmentation policies");
  add_common(aug_cmd, aug_opts);
  aug_cmd->add_option("--policies", policies,
                      "Policies such as weak_only rand_augment color_jitter+cutout (space or ';' separated)")
      ->delimiter(';');

  std::string report_in, report_format = "csv", report_out;
  auto* report_cmd = app.add_subcommand("report", "Render a run directory's summary as CSV or JSON");
  report_cmd->add_option("--in", report_in, "Run directory holding summary.json")->required();
  report_cmd->add_option("--format", report_format, "csv | json");
  report_cmd->add_option("--out", report_out, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    log::init_from_env();
    if (gen_cmd->parsed()) {
      gen.generator = parse_generator(gen_generator);
      gen.shift_kind = parse_shift_kind(gen_shift);
      const SsdaDataset dataset = generate_synthetic_ssda(gen, gen_shots);
      save_dataset(dataset, gen_out);
      log::info("wrote {} ({} source, {} target labeled, {} unlabeled, {} validation)", gen_out,
                dataset.source_labeled().size(), dataset.target_labeled().size(),
                dataset.target_unlabeled().size(), dataset.target_validation().size());
    } else if (train_cmd->parsed()) {
      ExperimentConfig cfg = resolve_config(train_opts);
      if (!method.empty()) cfg.train.objective = parse_objective(method);
      cfg.validate();
      write_resolved_config(cfg);
      const Summary s = run_experiment(cfg, cfg.output_dir);
      std::cout << render_report({summary_record(s)}, ReportFormat::csv);
    } else if (ablation_cmd->parsed()) {
      const ExperimentConfig cfg = resolve_config(ablation_opts);
      write_resolved_config(cfg);
      std::vector<Record> records;
      for (const Summary& s : run_ablation(cfg, cfg.output_dir)) records.push_back(summary_record(s));
      std::cout << render_report(records, ReportFormat::csv);
    } else if (sweep_cmd->parsed()) {
      const ExperimentConfig cfg = resolve_config(sweep_opts);
      SweepSpec sweep;
      if (!t_grid.empty()) sweep.temperatures = parse_grid(t_grid, "--t-grid");
      if (!tau_grid.empty()) sweep.thresholds = parse_grid(tau_grid, "--tau-grid");
      sweep.validate();
      write_resolved_config(cfg);
      std::cout << render_report(sweep_records(run_sweep(cfg, sweep, cfg.output_dir)), ReportFormat::csv);
    } else if (aug_cmd->parsed()) {
      const ExperimentConfig cfg = resolve_config(aug_opts);
      std::vector<std::set<StrongExtra>> sets;
      for (const std::string& p : policies) sets.push_back(parse_policy(p));
      if (sets.empty()) sets = {{StrongExtra::rand_augment}};
      write_resolved_config(cfg);
      std::cout << render_report(policy_records(run_augmentation_study(cfg, sets, cfg.output_dir)),
                                 ReportFormat::csv);
    } else if (report_cmd->parsed()) {
      const ReportFormat format = parse_report_format(report_format);
      const auto records = read_json_report(fs::path(report_in) / "summary.json");
      if (report_out.empty()) {
        std::cout << render_report(records, format);
      } else {
        emit_report(records, format, report_out);
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidHyperparameter& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
