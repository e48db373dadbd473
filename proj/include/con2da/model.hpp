#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "con2da/image.hpp"
#include "con2da/tensor.hpp"

namespace con2da {

/// y = x * weight + bias with weight [in, out] and bias [out].
struct Linear {
  Tensor weight;
  Tensor bias;
};

/// MLP backbone. Hidden layers use ReLU; the last layer is linear so features can point
/// anywhere on the sphere once normalized.
struct FeatureExtractor {
  std::vector<Linear> layers;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
};

/// Prototype classifier: probs = softmax(z W / temperature) with W of shape [d, K].
struct PrototypeClassifier {
  Tensor prototypes;
  double temperature = 0.05;
  bool normalized = false;  // unit-normalize the columns of W before use

  std::size_t num_classes() const { return prototypes.cols(); }
};

struct ModelDims {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden{512, 512};
  std::size_t feature_dim = 256;
  std::size_t num_classes = 0;

  void validate() const;
};

struct Con2daModel {
  FeatureExtractor extractor;
  PrototypeClassifier classifier;

  ModelDims dims() const;
  /// Extractor weights and biases layer by layer, then W.
  std::vector<Tensor> parameters() const;
  /// Extractor parameters only.
  std::vector<Tensor> extractor_parameters() const;
  /// Deep copy with fresh gradient-tracking leaves.
  Con2daModel clone() const;
  /// Overwrites parameter values from `other` (same dims) without reallocating.
  void assign_from(const Con2daModel& other);
};

/// Flattens images (all the same shape) into a [batch, C*H*W] tensor.
Tensor images_to_tensor(std::span<const Image* const> images);

/// Throws ContractViolation when pixels.cols() != input_dim.
Tensor extract_features(const FeatureExtractor& model, const Tensor& pixels);
/// Softmax over z W / T for rows of z that are already unit-norm. With
/// `detach_prototypes` W is read as a constant, so no gradient reaches it.
Tensor classify_normalized(const Tensor& z, const PrototypeClassifier& clf,
                           bool detach_prototypes = false);
/// l2_normalize followed by classify_normalized.
Tensor normalize_and_classify(const Tensor& features, const PrototypeClassifier& clf,
                              bool detach_prototypes = false);

/// Glorot-uniform weights (and W), zero biases. Deterministic under `seed`.
Con2daModel init_model(std::uint64_t seed, const ModelDims& dims, double temperature,
                       bool normalized);

inline constexpr std::uint32_t kModelFormatVersion = 1;
void save_model(const Con2daModel& model, const std::filesystem::path& path);
/// Throws ParseError on malformed input, IoError when the file cannot be opened.
Con2daModel load_model(const std::filesystem::path& path);

}  // namespace con2da
