#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "con2da/image.hpp"

namespace con2da {

enum class Domain : std::uint8_t { source = 0, target = 1 };

struct Sample {
  std::uint64_t id = 0;
  Image image;
  std::optional<int> label;
  Domain domain = Domain::source;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Extra distortions a strong view may add on top of the weak chain. Declaration order is
/// application order.
enum class StrongExtra : std::uint8_t { color_jitter, random_grayscale, rand_augment, cutout };

std::string_view to_string(StrongExtra extra);
std::optional<StrongExtra> parse_strong_extra(std::string_view name);
/// "weak_only" for the empty set, otherwise names joined with '+' in application order.
std::string strong_extras_label(const std::set<StrongExtra>& extras);

struct AugmentPolicy {
  std::array<double, 2> crop_scale_range{0.8, 1.0};  // fraction of image area
  double flip_probability = 0.5;
  std::array<double, 2> blur_sigma_range{0.1, 1.0};
  int rand_augment_ops = 1;         // H: operations applied per image
  int rand_augment_magnitude = 10;  // M in [0, 30]
  std::set<StrongExtra> strong_extras{StrongExtra::rand_augment};

  /// Throws InvalidHyperparameter on the first out-of-domain field.
  void validate() const;
  /// Policy whose weak chain and extras are all exact identities.
  static AugmentPolicy identity();
};

// RandAugment operation set. Intensity scales linearly with M / 30 between each op's
// minimum (M = 0) and maximum (M = 30):
//
//   identity, auto_contrast, equalize   no magnitude
//   rotate         0 .. 30 degrees, random sign
//   solarize       threshold 1 .. 0 (pixels above the threshold are inverted)
//   posterize      8 .. 4 bits
//   contrast       factor 1 +/- 0 .. 0.9, random sign
//   brightness     factor 1 +/- 0 .. 0.9, random sign
//   sharpness      factor 1 +/- 0 .. 0.9, random sign
//   shear_x/y      0 .. 0.3, random sign
//   translate_x/y  0 .. 0.45 of the image extent, random sign
//
// Geometric ops fill uncovered pixels with kRandAugmentFill. All outputs are clamped to [0, 1].
enum class RandAugmentOp : std::uint8_t {
  identity,
  auto_contrast,
  equalize,
  rotate,
  solarize,
  posterize,
  contrast,
  brightness,
  sharpness,
  shear_x,
  shear_y,
  translate_x,
  translate_y,
};
inline constexpr std::size_t kRandAugmentOpCount = 13;
inline constexpr double kRotateMaxDegrees = 30.0;
inline constexpr int kMaxMagnitude = 30;
inline constexpr float kRandAugmentFill = 0.5f;  // mid-gray, the customary RandAugment fill

std::string_view to_string(RandAugmentOp op);

struct RandAugmentDraw {
  RandAugmentOp op;
  bool negate;  // sign flip for the signed ops
};

/// The op/sign choices rand_augment makes for a given (H, seed).
std::vector<RandAugmentDraw> draw_rand_augment_ops(int num_ops, std::uint64_t seed);
/// Applies a single op at magnitude M with the given sign.
Image apply_rand_augment_op(const Image& img, RandAugmentOp op, int magnitude, bool negate);
Image rand_augment(const Image& img, int num_ops, int magnitude, std::uint64_t seed);

/// Random resized crop -> horizontal flip -> Gaussian blur, then clamp.
Image weak_transform(const Sample& x, const AugmentPolicy& policy, std::uint64_t seed);
/// The weak chain (own draws) followed by every enabled strong extra.
Image strong_transform(const Sample& x, const AugmentPolicy& policy, std::uint64_t seed);

inline constexpr double kCutoutSideRatio = 0.3;
inline constexpr double kJitterStrength = 0.4;
inline constexpr double kGrayscaleProbability = 0.2;

Image cutout(const Image& img, std::uint64_t seed);
Image color_jitter(const Image& img, std::uint64_t seed);
Image random_grayscale(const Image& img, std::uint64_t seed);

struct ViewPair {
  Image weak;
  Image strong;
  std::uint64_t origin_id = 0;
};

enum class ViewTag : std::uint64_t { weak = 1, strong = 2 };

/// Seed of one view of one sample within one iteration.
std::uint64_t view_seed(std::uint64_t iteration_seed, std::uint64_t sample_id, ViewTag tag);
ViewPair make_pair(const Sample& x, const AugmentPolicy& policy, std::uint64_t iteration_seed);

}  // namespace con2da
