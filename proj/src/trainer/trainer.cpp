#include "con2da/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "con2da/errors.hpp"
#include "con2da/log.hpp"
#include "con2da/ops.hpp"
#include "con2da/rng.hpp"

namespace con2da {

namespace {

// Independent random streams derived from TrainConfig::seed.
enum Stream : std::uint64_t { kModelInit = 1, kLabeledSampler = 2, kUnlabeledSampler = 3, kAugment = 4 };

constexpr std::size_t kEvalChunk = 512;

std::string batch_ids(const Batch& labeled, const Batch& unlabeled) {
  std::ostringstream out;
  out << "labeled ids [";
  for (std::size_t i = 0; i < labeled.size(); ++i) out << (i ? "," : "") << labeled[i]->id;
  out << "] unlabeled ids [";
  for (std::size_t i = 0; i < unlabeled.size(); ++i) out << (i ? "," : "") << unlabeled[i]->id;
  out << "]";
  return out.str();
}

}  // namespace

std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::con2da: return "con2da";
    case Objective::supervised_only: return "s_plus_t";
    case Objective::entropy: return "ent";
  }
  return "unknown";
}

Objective parse_objective(std::string_view name) {
  for (auto o : {Objective::con2da, Objective::supervised_only, Objective::entropy}) {
    if (to_string(o) == name) return o;
  }
  throw ConfigError("unknown method '" + std::string(name) + "' (expected con2da, s_plus_t or ent)");
}

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (!(temperature > 0.0)) problems.push_back("temperature must be > 0");
  if (!(threshold > 0.0 && threshold <= 1.0)) problems.push_back("threshold must lie in (0, 1]");
  if (!(learning_rate > 0.0)) problems.push_back("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) problems.push_back("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) problems.push_back("beta2 must lie in [0, 1)");
  if (total_iterations == 0) problems.push_back("total_iterations must be >= 1");
  if (patience == 0) problems.push_back("patience must be >= 1");
  if (shots == 0) problems.push_back("shots must be >= 1");
  if (labeled_batch_size != 0 && (labeled_batch_size < 2 || labeled_batch_size % 2 != 0)) {
    problems.push_back("labeled_batch_size must be 0 (auto) or an even number >= 2");
  }
  if (feature_dim == 0) problems.push_back("feature_dim must be positive");
  for (std::size_t h : hidden) {
    if (h == 0) problems.push_back("hidden widths must be positive");
  }
  try {
    augment.validate();
  } catch (const Error& e) {
    problems.push_back(e.what());
  }
  if (!problems.empty()) {
    std::string msg = "invalid training configuration:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

Trainer::Trainer(Con2daModel& model, const TrainConfig& cfg)
    : model_(&model),
      cfg_(cfg),
      schedule_{cfg.learning_rate, cfg.total_iterations},
      optimizer_(model.parameters(), cfg.beta1, cfg.beta2) {
  cfg_.validate();
}

IterationRecord Trainer::train_iteration(const Batch& labeled, const Batch& unlabeled,
                                         std::uint64_t iteration) {
  if (iteration == 0) throw ContractViolation("train_iteration: iterations are 1-based");
  const bool use_sup = !cfg_.disable_supervised;
  const bool use_unlabeled = cfg_.needs_unlabeled();
  if (use_sup && labeled.empty()) throw ContractViolation("train_iteration: empty labeled batch");
  if (use_unlabeled && unlabeled.empty()) throw ContractViolation("train_iteration: empty unlabeled batch");

  IterationRecord rec;
  rec.iteration = iteration;
  rec.lr = cosine_decay(schedule_, iteration - 1);

  // Augment every sample in parallel; per-sample seeds keep the result thread-count independent.
  std::vector<const Sample*> inputs;
  if (use_sup) inputs.insert(inputs.end(), labeled.begin(), labeled.end());
  if (use_unlabeled) inputs.insert(inputs.end(), unlabeled.begin(), unlabeled.end());
  if (inputs.empty()) return rec;
  const std::uint64_t iteration_seed = derive_seed(cfg_.seed, {kAugment, iteration});
  std::vector<ViewPair> pairs(inputs.size());
  const auto count = static_cast<std::ptrdiff_t>(inputs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    pairs[static_cast<std::size_t>(i)] = make_pair(*inputs[static_cast<std::size_t>(i)], cfg_.augment, iteration_seed);
  }

  // One forward over [labeled weak; labeled strong; unlabeled weak; unlabeled strong].
  const std::size_t nl = use_sup ? labeled.size() : 0;
  const std::size_t nu = use_unlabeled ? unlabeled.size() : 0;
  std::vector<const Image*> images;
  images.reserve(2 * inputs.size());
  for (std::size_t i = 0; i < nl; ++i) images.push_back(&pairs[i].weak);
  for (std::size_t i = 0; i < nl; ++i) images.push_back(&pairs[i].strong);
  for (std::size_t i = nl; i < nl + nu; ++i) images.push_back(&pairs[i].weak);
  for (std::size_t i = nl; i < nl + nu; ++i) images.push_back(&pairs[i].strong);
  NumericDiagnostics diag;
  std::vector<Tensor> terms;
  try {
    const Tensor z = l2_normalize(extract_features(model_->extractor, images_to_tensor(images)));

    if (use_sup) {
      std::vector<int> labels;
      for (const Sample* s : labeled) labels.push_back(*s->label);
      const Tensor p = classify_normalized(slice_rows(z, 0, 2 * nl), model_->classifier);
      const Tensor loss = supervised_loss(slice_rows(p, 0, nl), slice_rows(p, nl, 2 * nl), labels, &diag);
      rec.l_sup = loss.item();
      terms.push_back(loss);
    }
    if (use_unlabeled) {
      const Tensor zu_weak = slice_rows(z, 2 * nl, 2 * nl + nu);
      const Tensor zu_strong = slice_rows(z, 2 * nl + nu, 2 * nl + 2 * nu);
      if (cfg_.uses_entropy()) {
        const Tensor loss = entropy_loss(classify_normalized(zu_weak, model_->classifier), &diag);
        rec.l_ent = loss.item();
        terms.push_back(loss);
      }
      if (cfg_.uses_contrastive() && nu >= 2) {
        const Tensor loss = ntxent_loss(zu_weak, zu_strong, model_->classifier.temperature,
                                        cfg_.ntxent_denominator);
        rec.l_cont = loss.item();
        terms.push_back(loss);
      }
      if (cfg_.uses_self_supervised()) {
        // W is read as a constant here so the unlabeled losses only move the extractor.
        const Tensor p = classify_normalized(slice_rows(z, 2 * nl, 2 * nl + 2 * nu), model_->classifier,
                                             /*detach_prototypes=*/true);
        const Tensor pw = slice_rows(p, 0, nu);
        const Tensor ps = slice_rows(p, nu, 2 * nu);
        const PseudoLabelBatch pseudo = pseudo_label(pw, ps, cfg_.threshold);
        rec.mask_fraction = pseudo.mask_fraction();
        const Tensor loss = self_supervised_loss(pw, ps, pseudo, &diag);
        rec.l_self = loss.item();
        terms.push_back(loss);
      }
    }
  } catch (const DegenerateInput& e) {
    // A non-finite pixel or activation collapses a feature row before any loss exists.
    throw TrainingError("degenerate forward pass at iteration " + std::to_string(iteration) + " (" +
                        e.what() + "): " + batch_ids(labeled, unlabeled));
  }
  rec.clamp_count = diag.clamp_count;

  for (double v : {rec.l_sup, rec.l_cont, rec.l_self, rec.l_ent}) {
    if (!std::isfinite(v)) {
      throw TrainingError("non-finite loss at iteration " + std::to_string(iteration) + ": " +
                          batch_ids(labeled, unlabeled));
    }
  }
  if (terms.empty()) return rec;
  Tensor total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  optimizer_.zero_grad();
  total.backward();
  optimizer_.step(rec.lr);
  optimizer_.zero_grad();
  return rec;
}

double evaluate(const Con2daModel& model, std::span<const Sample> samples) {
  if (samples.empty()) throw ContractViolation("evaluate: empty sample list");
  NoGradGuard no_grad;
  std::size_t correct = 0;
  const std::size_t k = model.classifier.num_classes();
  for (std::size_t begin = 0; begin < samples.size(); begin += kEvalChunk) {
    const std::size_t end = std::min(samples.size(), begin + kEvalChunk);
    std::vector<const Image*> images;
    for (std::size_t i = begin; i < end; ++i) {
      if (!samples[i].label) throw ContractViolation("evaluate: sample " + std::to_string(samples[i].id) + " has no label");
      images.push_back(&samples[i].image);
    }
    const Tensor p = normalize_and_classify(extract_features(model.extractor, images_to_tensor(images)),
                                            model.classifier);
    const auto v = p.values();
    for (std::size_t r = 0; r < end - begin; ++r) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c) {
        if (v[r * k + c] > v[r * k + best]) best = c;
      }
      if (static_cast<int>(best) == *samples[begin + r].label) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

FitResult fit(const SsdaDataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  ModelDims dims;
  dims.input_dim = dataset.input_dim();
  dims.hidden = cfg.hidden;
  dims.feature_dim = cfg.feature_dim;
  dims.num_classes = dataset.num_classes();
  FitResult result{init_model(derive_seed(cfg.seed, {kModelInit}), dims, cfg.temperature,
                              cfg.cosine_classifier),
                   {}};
  Con2daModel& model = result.model;
  TrainReport& report = result.report;

  BatchSpec spec;
  spec.labeled_batch_size =
      cfg.labeled_batch_size ? cfg.labeled_batch_size : resolve_batch_size(dataset.target_labeled().size());
  spec.unlabeled_batch_size = cfg.unlabeled_batch_size ? cfg.unlabeled_batch_size : spec.labeled_batch_size;
  LabeledBatchSampler labeled_sampler(dataset, spec, derive_seed(cfg.seed, {kLabeledSampler}));
  std::optional<UnlabeledBatchSampler> unlabeled_sampler;
  if (cfg.needs_unlabeled()) {
    unlabeled_sampler.emplace(dataset, spec, derive_seed(cfg.seed, {kUnlabeledSampler}));
  }

  Trainer trainer(model, cfg);
  Con2daModel best = model.clone();
  double best_acc = -1.0;
  std::size_t since_improvement = 0;
  for (std::uint64_t t = 1; t <= cfg.total_iterations; ++t) {
    const Batch labeled = labeled_sampler.next();
    const Batch unlabeled = unlabeled_sampler ? unlabeled_sampler->next() : Batch{};
    IterationRecord rec = trainer.train_iteration(labeled, unlabeled, t);
    rec.val_acc = evaluate(model, dataset.target_validation());
    report.records.push_back(rec);
    log::debug("iter {} lr {:.3e} sup {:.4f} cont {:.4f} self {:.4f} mask {:.2f} val {:.4f}", t, rec.lr,
               rec.l_sup, rec.l_cont, rec.l_self, rec.mask_fraction, rec.val_acc);
    // Only a strict gain resets patience; a tie moves the snapshot to the newer model so a
    // plateau at the best accuracy keeps the most trained one.
    const bool improved = rec.val_acc > best_acc;
    if (improved || rec.val_acc == best_acc) {
      best_acc = rec.val_acc;
      report.best_iteration = t;
      best.assign_from(model);
    }
    if (improved) {
      since_improvement = 0;
    } else if (++since_improvement >= cfg.patience) {
      report.stopped_early = true;
      break;
    }
  }
  model.assign_from(best);
  report.best_validation_accuracy = best_acc;
  report.final_validation_accuracy = evaluate(model, dataset.target_validation());
  const std::vector<Sample> revealed = dataset.reveal_unlabeled("fit:final_evaluation");
  report.final_target_unlabeled_accuracy = evaluate(model, revealed);
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  log::info("fit done: {} iterations, best val {:.4f} at {}, target acc {:.4f}, {:.1f}s",
            report.records.size(), report.best_validation_accuracy, report.best_iteration,
            report.final_target_unlabeled_accuracy, report.wall_time_seconds);
  return result;
}

void write_metrics_csv(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "iteration,lr,l_sup,l_cont,l_self,mask_fraction,val_acc\n";
  char line[256];
  for (const IterationRecord& r : report.records) {
    std::snprintf(line, sizeof line, "%llu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  static_cast<unsigned long long>(r.iteration), r.lr, r.l_sup, r.l_cont, r.l_self,
                  r.mask_fraction, r.val_acc);
    out << line;
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace con2da
