#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "con2da/augment.hpp"
#include "con2da/data.hpp"
#include "con2da/losses.hpp"
#include "con2da/model.hpp"
#include "con2da/optim.hpp"

namespace con2da {

/// con2da: full three-loss procedure. supervised_only: the S+T baseline.
/// entropy: supervised loss plus conditional entropy on unlabeled data (ENT baseline).
enum class Objective { con2da, supervised_only, entropy };

std::string_view to_string(Objective o);
Objective parse_objective(std::string_view name);

struct TrainConfig {
  double temperature = 0.05;
  double threshold = 0.9;
  double learning_rate = 0.00008;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t total_iterations = 5000;
  std::size_t patience = 50;
  std::size_t shots = 3;
  std::size_t labeled_batch_size = 0;    // 0 = resolve_batch_size(n_target_labeled)
  std::size_t unlabeled_batch_size = 0;  // 0 = labeled batch size
  AugmentPolicy augment;
  Objective objective = Objective::con2da;
  bool disable_supervised = false;
  bool disable_contrastive = false;
  bool disable_self_supervised = false;
  bool cosine_classifier = false;
  NtXentDenominator ntxent_denominator = NtXentDenominator::negatives_only;
  std::vector<std::size_t> hidden{512, 512};
  std::size_t feature_dim = 256;
  std::uint64_t seed = 0;

  /// Throws ConfigError listing every violated constraint.
  void validate() const;
  bool uses_contrastive() const { return objective == Objective::con2da && !disable_contrastive; }
  bool uses_self_supervised() const {
    return objective == Objective::con2da && !disable_self_supervised;
  }
  bool uses_entropy() const { return objective == Objective::entropy; }
  bool needs_unlabeled() const { return uses_contrastive() || uses_self_supervised() || uses_entropy(); }
};

struct IterationRecord {
  std::uint64_t iteration = 0;  // 1-based
  double lr = 0.0;
  double l_sup = 0.0;
  double l_cont = 0.0;
  double l_self = 0.0;
  double l_ent = 0.0;
  double mask_fraction = 0.0;
  std::size_t clamp_count = 0;
  double val_acc = 0.0;
};

struct TrainReport {
  std::vector<IterationRecord> records;
  double best_validation_accuracy = 0.0;
  std::uint64_t best_iteration = 0;  // latest iteration at best_validation_accuracy
  double final_validation_accuracy = 0.0;
  double final_target_unlabeled_accuracy = 0.0;
  bool stopped_early = false;
  double wall_time_seconds = 0.0;  // excluded from every file and comparison
};

/// Owns the optimizer state for one model and runs single iterations of the procedure.
class Trainer {
 public:
  Trainer(Con2daModel& model, const TrainConfig& cfg);

  /// One iteration: augment both batches, forward, build the enabled losses, one backward
  /// and one Adam step at cosine_decay(iteration - 1). The classifier W receives gradient
  /// from the supervised loss only (and from the entropy loss in the ENT baseline).
  /// `unlabeled` may be empty when no unsupervised loss is enabled.
  /// Throws TrainingError naming the batch ids when a loss is not finite.
  IterationRecord train_iteration(const Batch& labeled, const Batch& unlabeled, std::uint64_t iteration);

  const LrSchedule& schedule() const { return schedule_; }

 private:
  Con2daModel* model_;
  TrainConfig cfg_;
  LrSchedule schedule_;
  Adam optimizer_;
};

/// Fraction of `samples` whose argmax prediction on raw pixels equals the label.
/// Throws ContractViolation for an empty list or a sample without a label.
double evaluate(const Con2daModel& model, std::span<const Sample> samples);

struct FitResult {
  Con2daModel model;
  TrainReport report;
};

/// Initializes a model from cfg.seed, trains with early stopping on target_validation,
/// restores the best snapshot and finally reveals the unlabeled labels for evaluation.
/// Patience counts iterations since the last strict accuracy gain; among iterations tied
/// at the best accuracy the latest one is kept.
FitResult fit(const SsdaDataset& dataset, const TrainConfig& cfg);

/// One CSV row per iteration: iteration,lr,l_sup,l_cont,l_self,mask_fraction,val_acc.
void write_metrics_csv(const TrainReport& report, const std::filesystem::path& path);

}  // namespace con2da
