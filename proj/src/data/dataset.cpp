#include <cstring>
#include <set>
#include <unordered_set>

#include "con2da/data.hpp"
#include "con2da/errors.hpp"

namespace con2da {

void HiddenLabelAudit::record(std::string_view caller) {
  std::lock_guard lock(mutex_);
  entries_.push_back({entries_.size(), std::string(caller)});
}

std::vector<HiddenLabelAudit::Entry> HiddenLabelAudit::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t HiddenLabelAudit::read_count() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

SsdaDataset::SsdaDataset(std::uint32_t num_classes, std::vector<Sample> source_labeled,
                         std::vector<Sample> target_labeled, std::vector<Sample> target_unlabeled,
                         std::vector<Sample> target_validation)
    : num_classes_(num_classes),
      source_labeled_(std::move(source_labeled)),
      target_labeled_(std::move(target_labeled)),
      target_unlabeled_(std::move(target_unlabeled)),
      target_validation_(std::move(target_validation)) {
  hidden_labels_.reserve(target_unlabeled_.size());
  for (Sample& s : target_unlabeled_) {
    hidden_labels_.push_back(s.label.value_or(-1));
    s.label.reset();
  }
  validate();
}

void SsdaDataset::validate() const {
  const auto fail = [](const std::string& msg) { throw ContractViolation("ssda dataset: " + msg); };
  if (num_classes_ == 0) fail("num_classes must be positive");

  std::unordered_set<std::uint64_t> ids;
  const Image* reference = nullptr;
  const auto check_split = [&](const std::vector<Sample>& split, const char* name, Domain domain,
                               bool labeled) {
    for (const Sample& s : split) {
      if (!ids.insert(s.id).second) fail(std::string("duplicate sample id ") + std::to_string(s.id));
      if (s.domain != domain) fail(std::string(name) + ": wrong domain tag");
      if (labeled) {
        if (!s.label || *s.label < 0 || static_cast<std::uint32_t>(*s.label) >= num_classes_) {
          fail(std::string(name) + ": missing or out-of-range label on id " + std::to_string(s.id));
        }
      }
      if (s.image.pixels.size() != std::size_t{s.image.channels} * s.image.plane_size()) {
        fail(std::string(name) + ": pixel count does not match image shape");
      }
      if (reference && !reference->same_shape(s.image)) fail("images differ in shape");
      reference = &s.image;
    }
  };
  check_split(source_labeled_, "source_labeled", Domain::source, true);
  check_split(target_labeled_, "target_labeled", Domain::target, true);
  check_split(target_unlabeled_, "target_unlabeled", Domain::target, false);
  check_split(target_validation_, "target_validation", Domain::target, true);

  for (int label : hidden_labels_) {
    if (label < -1 || label >= static_cast<int>(num_classes_)) fail("hidden label out of range");
  }

  const auto histogram = [this](const std::vector<Sample>& split) {
    std::vector<std::size_t> counts(num_classes_, 0);
    for (const Sample& s : split) ++counts[static_cast<std::size_t>(*s.label)];
    return counts;
  };
  const auto target_counts = histogram(target_labeled_);
  for (std::size_t c : target_counts) {
    if (c != target_counts.front()) fail("target_labeled must hold the same count for every class");
  }
  for (std::size_t c : histogram(target_validation_)) {
    if (c != kValidationPerClass) fail("target_validation must hold exactly 3 samples per class");
  }
}

std::size_t SsdaDataset::shots() const {
  return num_classes_ == 0 ? 0 : target_labeled_.size() / num_classes_;
}

std::vector<Sample> SsdaDataset::reveal_unlabeled(std::string_view caller) const {
  audit_->record(caller);
  std::vector<Sample> out = target_unlabeled_;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (hidden_labels_[i] >= 0) out[i].label = hidden_labels_[i];
  }
  return out;
}

std::uint64_t SsdaDataset::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto feed = [&h](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const auto feed_split = [&](const std::vector<Sample>& split, const std::vector<int>* hidden) {
    const std::uint64_t count = split.size();
    feed(&count, sizeof count);
    for (std::size_t i = 0; i < split.size(); ++i) {
      const Sample& s = split[i];
      const int label = hidden ? (*hidden)[i] : s.label.value_or(-1);
      feed(&s.id, sizeof s.id);
      feed(&label, sizeof label);
      feed(s.image.pixels.data(), s.image.pixels.size() * sizeof(float));
    }
  };
  feed(&num_classes_, sizeof num_classes_);
  feed_split(source_labeled_, nullptr);
  feed_split(target_labeled_, nullptr);
  feed_split(target_unlabeled_, &hidden_labels_);
  feed_split(target_validation_, nullptr);
  return h;
}

std::size_t SsdaDataset::input_dim() const {
  for (const auto* split : {&source_labeled_, &target_labeled_, &target_unlabeled_, &target_validation_}) {
    if (!split->empty()) return split->front().image.pixels.size();
  }
  return 0;
}

bool operator==(const SsdaDataset& a, const SsdaDataset& b) {
  return a.num_classes_ == b.num_classes_ && a.source_labeled_ == b.source_labeled_ &&
         a.target_labeled_ == b.target_labeled_ && a.target_unlabeled_ == b.target_unlabeled_ &&
         a.hidden_labels_ == b.hidden_labels_ && a.target_validation_ == b.target_validation_;
}

}  // namespace con2da
