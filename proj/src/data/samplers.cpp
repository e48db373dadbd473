#include <algorithm>
#include <numeric>

#include "con2da/data.hpp"
#include "con2da/errors.hpp"

namespace con2da {

namespace {

constexpr std::size_t kMaxBatch = 256;

std::vector<std::size_t> iota_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  return order;
}

}  // namespace

void BatchSpec::validate() const {
  if (labeled_batch_size < 2 || labeled_batch_size % 2 != 0) {
    throw ConfigError("labeled batch size must be even and >= 2, got " +
                      std::to_string(labeled_batch_size));
  }
  if (unlabeled_batch_size < 1) throw ConfigError("unlabeled batch size must be >= 1");
}

std::size_t resolve_batch_size(std::size_t n_target_labeled) {
  const std::size_t n = std::min(kMaxBatch, n_target_labeled);
  return std::max<std::size_t>(2, n - n % 2);
}

LabeledBatchSampler::LabeledBatchSampler(const SsdaDataset& dataset, BatchSpec spec,
                                         std::uint64_t seed)
    : dataset_(&dataset), half_(spec.labeled_batch_size / 2), rng_(seed) {
  spec.validate();
  if (dataset.source_labeled().empty()) throw ConfigError("labeled sampler: source_labeled is empty");
  if (dataset.target_labeled().empty()) throw ConfigError("labeled sampler: target_labeled is empty");
  source_order_ = iota_order(dataset.source_labeled().size());
  rng_.shuffle(source_order_.begin(), source_order_.end());
  target_order_ = iota_order(dataset.target_labeled().size());
  rng_.shuffle(target_order_.begin(), target_order_.end());
}

Batch LabeledBatchSampler::next() {
  const auto& source = dataset_->source_labeled();
  const auto& target = dataset_->target_labeled();
  Batch batch;
  batch.reserve(2 * half_);
  for (std::size_t i = 0; i < half_; ++i) {
    if (source_pos_ == source_order_.size()) {
      rng_.shuffle(source_order_.begin(), source_order_.end());
      source_pos_ = 0;
    }
    batch.push_back(&source[source_order_[source_pos_++]]);
  }
  if (half_ > target.size()) {
    for (std::size_t i = 0; i < half_; ++i) batch.push_back(&target[rng_.index(target.size())]);
  } else {
    for (std::size_t i = 0; i < half_; ++i) {
      if (target_pos_ == target_order_.size()) {
        rng_.shuffle(target_order_.begin(), target_order_.end());
        target_pos_ = 0;
      }
      batch.push_back(&target[target_order_[target_pos_++]]);
    }
  }
  return batch;
}

UnlabeledBatchSampler::UnlabeledBatchSampler(const SsdaDataset& dataset, BatchSpec spec,
                                             std::uint64_t seed)
    : dataset_(&dataset), batch_size_(spec.unlabeled_batch_size), rng_(seed) {
  spec.validate();
  if (dataset.target_unlabeled().empty()) {
    throw ConfigError("unlabeled sampler: target_unlabeled is empty");
  }
  order_ = iota_order(dataset.target_unlabeled().size());
  rng_.shuffle(order_.begin(), order_.end());
}

Batch UnlabeledBatchSampler::next() {
  const auto& pool = dataset_->target_unlabeled();
  if (pos_ == order_.size()) {
    rng_.shuffle(order_.begin(), order_.end());
    pos_ = 0;
  }
  const std::size_t take = std::min(batch_size_, order_.size() - pos_);
  Batch batch;
  batch.reserve(take);
  for (std::size_t i = 0; i < take; ++i) batch.push_back(&pool[order_[pos_++]]);
  return batch;
}

}  // namespace con2da
