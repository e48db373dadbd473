#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "con2da/data.hpp"
#include "con2da/errors.hpp"
#include "con2da/optim.hpp"
#include "con2da/rng.hpp"
#include "con2da/trainer.hpp"

using namespace con2da;

namespace {

ShiftSpec tiny_spec(double magnitude = 15.0, Generator g = Generator::textured_grid) {
  ShiftSpec s;
  s.generator = g;
  s.num_classes = 3;
  s.samples_per_domain = 90;
  s.shift_magnitude = magnitude;
  s.seed = 5;
  s.height = 8;
  s.width = 8;
  return s;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.hidden = {24, 16};
  c.feature_dim = 8;
  c.temperature = 0.3;
  c.threshold = 0.6;
  c.total_iterations = 30;
  c.learning_rate = 1e-3;
  c.seed = 11;
  return c;
}

Con2daModel model_for(const SsdaDataset& d, const TrainConfig& c) {
  ModelDims dims;
  dims.input_dim = d.input_dim();
  dims.hidden = c.hidden;
  dims.feature_dim = c.feature_dim;
  dims.num_classes = d.num_classes();
  return init_model(c.seed, dims, c.temperature, c.cosine_classifier);
}

std::vector<std::vector<double>> snapshot(const Con2daModel& m) {
  std::vector<std::vector<double>> out;
  for (const Tensor& p : m.parameters()) out.emplace_back(p.values().begin(), p.values().end());
  return out;
}

bool same_values(const Tensor& t, const std::vector<double>& v) {
  return std::equal(t.values().begin(), t.values().end(), v.begin(), v.end());
}

BatchSpec batch_spec(const SsdaDataset& d) {
  const std::size_t n = resolve_batch_size(d.target_labeled().size());
  return {n, n};
}

}  // namespace

TEST_CASE("both unsupervised switches off is bitwise the supervised-only step") {
  const SsdaDataset d = generate_synthetic_ssda(tiny_spec(), 3);
  TrainConfig a = tiny_config();
  a.disable_contrastive = true;
  a.disable_self_supervised = true;
  TrainConfig b = tiny_config();
  b.objective = Objective::supervised_only;

  Con2daModel ma = model_for(d, a), mb = model_for(d, b);
  Trainer ta(ma, a), tb(mb, b);
  LabeledBatchSampler la(d, batch_spec(d), 1), lb(d, batch_spec(d), 1);
  UnlabeledBatchSampler ua(d, batch_spec(d), 2);
  for (std::uint64_t t = 1; t <= 3; ++t) {
    const IterationRecord ra = ta.train_iteration(la.next(), ua.next(), t);
    const IterationRecord rb = tb.train_iteration(lb.next(), {}, t);
    CHECK(ra.l_sup == rb.l_sup);
    CHECK(ra.l_cont == 0.0);
    CHECK(ra.l_self == 0.0);
  }
  CHECK(snapshot(ma) == snapshot(mb));
}

TEST_CASE("routing: without the supervised loss W never moves while f does") {
  const SsdaDataset d = generate_synthetic_ssda(tiny_spec(), 3);
  TrainConfig c = tiny_config();
  c.disable_supervised = true;
  c.threshold = 0.34;  // low enough that the pseudo-label branch is active too
  Con2daModel m = model_for(d, c);
  Trainer tr(m, c);
  LabeledBatchSampler ls(d, batch_spec(d), 1);
  UnlabeledBatchSampler us(d, batch_spec(d), 2);
  const std::vector<double> w0(m.classifier.prototypes.values().begin(), m.classifier.prototypes.values().end());
  double mask_seen = 0.0;
  for (std::uint64_t t = 1; t <= 20; ++t) {
    const auto before = snapshot(m);
    const IterationRecord r = tr.train_iteration(ls.next(), us.next(), t);
    mask_seen = std::max(mask_seen, r.mask_fraction);
    CHECK(same_values(m.classifier.prototypes, w0));
    bool f_changed = false;
    const auto ps = m.extractor_parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) f_changed = f_changed || !same_values(ps[i], before[i]);
    CHECK(f_changed);
  }
  CHECK(mask_seen > 0.0);
}

TEST_CASE("routing: the supervised loss alone moves both f and W") {
  const SsdaDataset d = generate_synthetic_ssda(tiny_spec(), 3);
  TrainConfig c = tiny_config();
  c.disable_contrastive = true;
  c.disable_self_supervised = true;
  Con2daModel m = model_for(d, c);
  Trainer tr(m, c);
  LabeledBatchSampler ls(d, batch_spec(d), 1);
  for (std::uint64_t t = 1; t <= 5; ++t) {
    const auto before = snapshot(m);
    tr.train_iteration(ls.next(), {}, t);
    CHECK_FALSE(same_values(m.classifier.prototypes, before.back()));
    CHECK_FALSE(same_values(m.extractor.layers[0].weight, before[0]));
  }
}

TEST_CASE("entropy baseline updates W from the unlabeled branch") {
  const SsdaDataset d = generate_synthetic_ssda(tiny_spec(), 3);
  TrainConfig c = tiny_config();
  c.objective = Objective::entropy;
  c.disable_supervised = true;
  Con2daModel m = model_for(d, c);
  Trainer tr(m, c);
  LabeledBatchSampler ls(d, batch_spec(d), 1);
  UnlabeledBatchSampler us(d, batch_spec(d), 2);
  const auto before = snapshot(m);
  const IterationRecord r = tr.train_iteration(ls.next(), us.next(), 1);
  CHECK(r.l_ent > 0.0);
  CHECK_FALSE(same_values(m.classifier.prototypes, before.back()));
}

TEST_CASE("learning-rate trace equals the cosine schedule") {
  const SsdaDataset d = generate_synthetic_ssda(tiny_spec(), 3);
  TrainConfig c = tiny_config();
  c.total_iterations = 40;
  c.patience = 1000;
  const FitResult r = fit(d, c);
  REQUIRE(r.report.records.size() == 40);
  const LrSchedule s{c.learning_rate, c.total_iterations};
  for (const IterationRecord& rec : r.report.records) CHECK(rec.lr == cosine_decay(s, rec.iteration - 1));
}

TEST_CASE("patience 1 with constant validation accuracy stops at iteration 2") {
  const SsdaDataset d = generate_synthetic_ssda(tiny_spec(), 3);
  TrainConfig c = tiny_config();
  c.patience = 1;
  c.learning_rate = std::numeric_limits<double>::denorm_min();  // updates vanish below one ulp
  const FitResult r = fit(d, c);
  CHECK(r.report.records.size() == 2);
  CHECK(r.report.stopped_early);
  CHECK(r.report.best_iteration == 2);  // a tie moves the snapshot forward
  CHECK(r.report.records[0].val_acc == r.report.records[1].val_acc);
}

TEST_CASE("fit restores the best snapshot, reveals labels once and is deterministic") {
  const SsdaDataset d = generate_synthetic_ssda(tiny_spec(), 3);
  TrainConfig c = tiny_config();
  c.patience = 5;
  const FitResult a = fit(d, c);
  CHECK(a.report.final_validation_accuracy == a.report.best_validation_accuracy);
  REQUIRE(d.audit().read_count() == 1);
  CHECK(d.audit().entries()[0].caller == "fit:final_evaluation");

  const FitResult b = fit(d, c);
  CHECK(a.report.records.size() == b.report.records.size());
  for (std::size_t i = 0; i < a.report.records.size(); ++i) {
    const auto &x = a.report.records[i], &y = b.report.records[i];
    CHECK(x.l_sup == y.l_sup);
    CHECK(x.l_cont == y.l_cont);
    CHECK(x.l_self == y.l_self);
    CHECK(x.val_acc == y.val_acc);
  }
  CHECK(a.report.final_target_unlabeled_accuracy == b.report.final_target_unlabeled_accuracy);
  CHECK(snapshot(a.model) == snapshot(b.model));
}

TEST_CASE("supervised-only runs record zero unsupervised losses") {
  const SsdaDataset d = generate_synthetic_ssda(tiny_spec(), 3);
  TrainConfig c = tiny_config();
  c.objective = Objective::supervised_only;
  const FitResult r = fit(d, c);
  for (const IterationRecord& rec : r.report.records) {
    CHECK(rec.l_cont == 0.0);
    CHECK(rec.l_self == 0.0);
    CHECK(rec.mask_fraction == 0.0);
  }
}

TEST_CASE("supervised loss on a fixed batch is essentially non-increasing") {
  const SsdaDataset d = generate_synthetic_ssda(tiny_spec(), 3);
  TrainConfig c = tiny_config();
  c.objective = Objective::supervised_only;
  c.augment = AugmentPolicy::identity();
  c.learning_rate = 1e-3;
  c.total_iterations = 100;
  Con2daModel m = model_for(d, c);
  Trainer tr(m, c);
  LabeledBatchSampler ls(d, batch_spec(d), 3);
  const Batch fixed = ls.next();
  double prev = std::numeric_limits<double>::infinity();
  int increases = 0;
  for (std::uint64_t t = 1; t <= 100; ++t) {
    const double l = tr.train_iteration(fixed, {}, t).l_sup;
    if (l > prev + 1e-6) ++increases;
    prev = l;
  }
  CHECK(increases < 5);
}

TEST_CASE("zero-shift separable data is learned") {
  ShiftSpec s = tiny_spec(0.0, Generator::gaussian_blobs);
  s.num_classes = 4;
  s.samples_per_domain = 200;
  s.height = 16;
  s.width = 16;
  std::vector<double> acc;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    s.seed = 100 + seed;
    const SsdaDataset d = generate_synthetic_ssda(s, 3);
    TrainConfig c;
    c.hidden = {128, 128};
    c.feature_dim = 64;
    c.temperature = 0.05;
    c.threshold = 0.9;
    c.total_iterations = 500;
    c.seed = seed;
    acc.push_back(fit(d, c).report.final_target_unlabeled_accuracy);
  }
  std::sort(acc.begin(), acc.end());
  CHECK(acc[2] >= 0.95);
}

TEST_CASE("evaluate") {
  SUBCASE("a model unrelated to the labels scores near chance") {
    Rng rng(3);
    std::vector<Sample> samples(10000);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      samples[i].id = i;
      samples[i].image = Image(1, 2, 2);
      for (float& v : samples[i].image.pixels) v = static_cast<float>(rng.uniform());
      samples[i].label = static_cast<int>(rng.index(4));
    }
    ModelDims dims;
    dims.input_dim = 4;
    dims.hidden = {8};
    dims.feature_dim = 4;
    dims.num_classes = 4;
    const Con2daModel m = init_model(1, dims, 0.05, false);
    const auto before = snapshot(m);
    const double a = evaluate(m, samples);
    CHECK(a >= 0.22);
    CHECK(a <= 0.28);
    CHECK(evaluate(m, samples) == a);
    CHECK(snapshot(m) == before);

    // Relabel every sample with the model's own prediction: a perfectly memorized set.
    for (Sample& s : samples) {
      for (int k = 0; k < 4; ++k) {
        s.label = k;
        if (evaluate(m, std::span<const Sample>(&s, 1)) == 1.0) break;
      }
    }
    CHECK(evaluate(m, samples) == 1.0);
  }
  SUBCASE("contract") {
    const SsdaDataset d = generate_synthetic_ssda(tiny_spec(), 3);
    const Con2daModel m = model_for(d, tiny_config());
    CHECK_THROWS_AS(evaluate(m, std::span<const Sample>()), ContractViolation);
    CHECK_THROWS_AS(evaluate(m, d.target_unlabeled()), ContractViolation);
  }
}

TEST_CASE("non-finite losses stop training with the offending ids") {
  const SsdaDataset d = generate_synthetic_ssda(tiny_spec(), 3);
  TrainConfig c = tiny_config();
  c.objective = Objective::supervised_only;
  c.augment = AugmentPolicy::identity();
  Con2daModel m = model_for(d, c);
  Trainer tr(m, c);
  Sample poisoned = d.source_labeled()[0];
  poisoned.image.pixels[0] = std::numeric_limits<float>::quiet_NaN();
  const Batch b{&poisoned, &d.target_labeled()[0]};
  try {
    tr.train_iteration(b, {}, 1);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find(std::to_string(poisoned.id)) != std::string::npos);
  }
}

TEST_CASE("configuration validation collects every problem") {
  TrainConfig c;
  c.temperature = 0.0;
  c.threshold = 1.5;
  c.patience = 0;
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("temperature") != std::string::npos);
    CHECK(msg.find("threshold") != std::string::npos);
    CHECK(msg.find("patience") != std::string::npos);
  }
  CHECK(parse_objective("s_plus_t") == Objective::supervised_only);
  CHECK(parse_objective("ent") == Objective::entropy);
  CHECK_THROWS_AS(parse_objective("mme"), ConfigError);
}

TEST_CASE("metrics CSV") {
  const SsdaDataset d = generate_synthetic_ssda(tiny_spec(), 3);
  TrainConfig c = tiny_config();
  c.total_iterations = 3;
  const FitResult r = fit(d, c);
  const auto path = std::filesystem::temp_directory_path() / "con2da_test_metrics.csv";
  write_metrics_csv(r.report, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "iteration,lr,l_sup,l_cont,l_self,mask_fraction,val_acc");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
  std::filesystem::remove(path);
}
