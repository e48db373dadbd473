#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "con2da/augment.hpp"
#include "con2da/rng.hpp"

namespace con2da {

/// Record of every read of the hidden target-unlabeled labels.
class HiddenLabelAudit {
 public:
  struct Entry {
    std::uint64_t sequence;
    std::string caller;
  };

  void record(std::string_view caller);
  std::vector<Entry> entries() const;
  std::size_t read_count() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Entry> entries_;
};

/// The four-way SSDA split. Immutable after construction.
///
/// Target-unlabeled samples are stored without labels; their ground truth lives in a
/// separate vault that can only be read through reveal_unlabeled(), and every read is
/// recorded in audit(). Copies of a dataset share one audit log.
class SsdaDataset {
 public:
  SsdaDataset() = default;
  /// `target_unlabeled` labels are moved into the vault (absent labels are stored as -1).
  /// Throws ContractViolation when the split invariants do not hold.
  SsdaDataset(std::uint32_t num_classes, std::vector<Sample> source_labeled,
              std::vector<Sample> target_labeled, std::vector<Sample> target_unlabeled,
              std::vector<Sample> target_validation);

  std::uint32_t num_classes() const { return num_classes_; }
  /// Labeled target samples per class.
  std::size_t shots() const;

  const std::vector<Sample>& source_labeled() const { return source_labeled_; }
  const std::vector<Sample>& target_labeled() const { return target_labeled_; }
  /// Unlabeled target samples; `label` is always empty here.
  const std::vector<Sample>& target_unlabeled() const { return target_unlabeled_; }
  const std::vector<Sample>& target_validation() const { return target_validation_; }

  /// Target-unlabeled samples with their hidden labels restored. Logged in audit().
  std::vector<Sample> reveal_unlabeled(std::string_view caller) const;
  const HiddenLabelAudit& audit() const { return *audit_; }

  /// FNV-1a over ids, labels (including hidden ones) and pixels of every split.
  std::uint64_t checksum() const;
  std::size_t input_dim() const;

  /// Deep comparison including hidden labels; the audit log is ignored.
  friend bool operator==(const SsdaDataset& a, const SsdaDataset& b);

  // Raw vault access for serialization only.
  const std::vector<int>& hidden_labels_for_serialization() const { return hidden_labels_; }

 private:
  void validate() const;

  std::uint32_t num_classes_ = 0;
  std::vector<Sample> source_labeled_;
  std::vector<Sample> target_labeled_;
  std::vector<Sample> target_unlabeled_;
  std::vector<int> hidden_labels_;
  std::vector<Sample> target_validation_;
  std::shared_ptr<HiddenLabelAudit> audit_ = std::make_shared<HiddenLabelAudit>();
};

inline constexpr std::size_t kValidationPerClass = 3;
/// Minimum unlabeled target samples per class the generator insists on.
inline constexpr std::size_t kMinUnlabeledPerClass = 10;

// -- synthetic domain-shift generation ------------------------------------------------------

enum class Generator { two_moons, gaussian_blobs, textured_grid };
enum class ShiftKind { rotation, translation, channel_swap, noise };

std::string_view to_string(Generator g);
std::string_view to_string(ShiftKind k);
Generator parse_generator(std::string_view name);
ShiftKind parse_shift_kind(std::string_view name);

/// How the target domain differs from the source. Magnitude units by kind:
/// rotation in degrees, translation in pixels (along x), channel_swap as the mixing
/// fraction in [0, 1] between channels 0 and 1, noise as the std-dev of additive noise.
struct ShiftSpec {
  Generator generator = Generator::textured_grid;
  std::uint32_t num_classes = 5;
  std::size_t samples_per_domain = 400;
  ShiftKind shift_kind = ShiftKind::rotation;
  double shift_magnitude = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t channels = 3;
  std::uint32_t height = 16;
  std::uint32_t width = 16;
};

/// Renders one un-shifted sample image of class `label`.
Image render_class_image(const ShiftSpec& spec, int label, Rng& rng);
/// Applies the target-domain shift to one image.
Image apply_shift(const Image& img, ShiftKind kind, double magnitude, Rng& rng);
/// Builds a full SSDA split: balanced classes per domain, `shots` labeled and 3 validation
/// samples per target class, the rest unlabeled. Deterministic under spec.seed.
SsdaDataset generate_synthetic_ssda(const ShiftSpec& spec, std::size_t shots);

// -- batching ---------------------------------------------------------------------------------

struct BatchSpec {
  std::size_t labeled_batch_size = 2;    // N; must be even
  std::size_t unlabeled_batch_size = 2;  // defaults to N

  void validate() const;
};

/// min(256, n_target_labeled), rounded down to an even number no smaller than 2.
std::size_t resolve_batch_size(std::size_t n_target_labeled);

using Batch = std::vector<const Sample*>;

/// Emits N/2 source + N/2 target labeled samples per batch. The source side walks a
/// shuffled permutation and reshuffles on exhaustion; the target side does the same when
/// N/2 <= n_t and draws with replacement otherwise.
class LabeledBatchSampler {
 public:
  LabeledBatchSampler(const SsdaDataset& dataset, BatchSpec spec, std::uint64_t seed);
  Batch next();

 private:
  const SsdaDataset* dataset_;
  std::size_t half_;
  Rng rng_;
  std::vector<std::size_t> source_order_;
  std::size_t source_pos_ = 0;
  std::vector<std::size_t> target_order_;
  std::size_t target_pos_ = 0;
};

/// Shuffled passes over target_unlabeled; the last batch of a pass may be short.
class UnlabeledBatchSampler {
 public:
  UnlabeledBatchSampler(const SsdaDataset& dataset, BatchSpec spec, std::uint64_t seed);
  Batch next();

 private:
  const SsdaDataset* dataset_;
  std::size_t batch_size_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

// -- persistence ------------------------------------------------------------------------------

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

void save_dataset(const SsdaDataset& dataset, const std::filesystem::path& path);
/// Throws ParseError (with byte offset and field) on malformed input, IoError when the
/// file cannot be opened. Nothing is returned unless the whole file parses.
SsdaDataset load_dataset(const std::filesystem::path& path);
/// Same as load_dataset over an in-memory image of the file.
SsdaDataset parse_dataset(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_dataset(const SsdaDataset& dataset);

}  // namespace con2da
