#include "con2da/augment.hpp"

#include <algorithm>
#include <cmath>

#include "con2da/errors.hpp"
#include "con2da/rng.hpp"

namespace con2da {

std::string_view to_string(StrongExtra extra) {
  switch (extra) {
    case StrongExtra::color_jitter: return "color_jitter";
    case StrongExtra::random_grayscale: return "random_grayscale";
    case StrongExtra::rand_augment: return "rand_augment";
    case StrongExtra::cutout: return "cutout";
  }
  return "unknown";
}

std::optional<StrongExtra> parse_strong_extra(std::string_view name) {
  for (auto e : {StrongExtra::color_jitter, StrongExtra::random_grayscale,
                 StrongExtra::rand_augment, StrongExtra::cutout}) {
    if (to_string(e) == name) return e;
  }
  return std::nullopt;
}

std::string strong_extras_label(const std::set<StrongExtra>& extras) {
  if (extras.empty()) return "weak_only";
  std::string label;
  for (StrongExtra e : extras) {
    if (!label.empty()) label += '+';
    label += to_string(e);
  }
  return label;
}

void AugmentPolicy::validate() const {
  const auto fail = [](const std::string& msg) { throw InvalidHyperparameter("augment policy: " + msg); };
  if (!(crop_scale_range[0] > 0.0 && crop_scale_range[0] <= crop_scale_range[1] &&
        crop_scale_range[1] <= 1.0)) {
    fail("crop_scale_range must satisfy 0 < lo <= hi <= 1");
  }
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) fail("flip_probability outside [0, 1]");
  if (!(blur_sigma_range[0] >= 0.0 && blur_sigma_range[0] <= blur_sigma_range[1])) {
    fail("blur_sigma_range must satisfy 0 <= lo <= hi");
  }
  if (rand_augment_ops < 1) fail("rand_augment_ops (H) must be >= 1");
  if (rand_augment_magnitude < 0 || rand_augment_magnitude > kMaxMagnitude) {
    fail("rand_augment_magnitude (M) must lie in [0, 30]");
  }
}

AugmentPolicy AugmentPolicy::identity() {
  AugmentPolicy p;
  p.crop_scale_range = {1.0, 1.0};
  p.flip_probability = 0.0;
  p.blur_sigma_range = {0.0, 0.0};
  p.strong_extras.clear();
  return p;
}

namespace {

Image weak_chain(const Image& img, const AugmentPolicy& policy, std::uint64_t seed) {
  Rng rng(seed);
  // Every draw is taken unconditionally so the stream layout never depends on the policy.
  const double area = rng.uniform(policy.crop_scale_range[0], policy.crop_scale_range[1]);
  const double side_scale = std::sqrt(area);
  const auto side = [side_scale](std::uint32_t extent) {
    const auto s = static_cast<std::uint32_t>(std::lround(extent * side_scale));
    return std::clamp<std::uint32_t>(s, 1, extent);
  };
  const std::uint32_t crop_h = side(img.height);
  const std::uint32_t crop_w = side(img.width);
  const auto y0 = static_cast<std::uint32_t>(rng.index(img.height - crop_h + 1));
  const auto x0 = static_cast<std::uint32_t>(rng.index(img.width - crop_w + 1));
  const bool flip = rng.bernoulli(policy.flip_probability);
  const double sigma = rng.uniform(policy.blur_sigma_range[0], policy.blur_sigma_range[1]);

  Image out = imageops::resized_crop(img, y0, x0, crop_h, crop_w);
  if (flip) out = imageops::hflip(out);
  out = imageops::gaussian_blur(out, sigma);
  imageops::clamp01(out);
  return out;
}

}  // namespace

Image weak_transform(const Sample& x, const AugmentPolicy& policy, std::uint64_t seed) {
  return weak_chain(x.image, policy, seed);
}

Image cutout(const Image& img, std::uint64_t seed) {
  const auto side = static_cast<std::uint32_t>(
      std::floor(kCutoutSideRatio * std::min(img.height, img.width)));
  if (side == 0) return img;
  Rng rng(seed);
  const auto y0 = static_cast<std::uint32_t>(rng.index(img.height - side + 1));
  const auto x0 = static_cast<std::uint32_t>(rng.index(img.width - side + 1));
  Image out = img;
  for (std::uint32_t c = 0; c < img.channels; ++c) {
    const float fill = imageops::channel_mean(img, c);
    for (std::uint32_t y = y0; y < y0 + side; ++y) {
      for (std::uint32_t x = x0; x < x0 + side; ++x) out.at(c, y, x) = fill;
    }
  }
  return out;
}

Image color_jitter(const Image& img, std::uint64_t seed) {
  Rng rng(seed);
  const double brightness = rng.uniform(1.0 - kJitterStrength, 1.0 + kJitterStrength);
  const double contrast = rng.uniform(1.0 - kJitterStrength, 1.0 + kJitterStrength);
  const double saturation = rng.uniform(1.0 - kJitterStrength, 1.0 + kJitterStrength);

  Image out = img;
  for (float& v : out.pixels) v = static_cast<float>(v * brightness);
  imageops::clamp01(out);

  const auto lum = imageops::luminance(out);
  double mean = 0.0;
  for (float v : lum) mean += v;
  mean /= static_cast<double>(lum.size());
  for (float& v : out.pixels) v = static_cast<float>(mean + contrast * (v - mean));
  imageops::clamp01(out);

  const auto gray = imageops::luminance(out);
  const std::size_t n = out.plane_size();
  for (std::uint32_t c = 0; c < out.channels; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      float& v = out.pixels[c * n + i];
      v = static_cast<float>(gray[i] + saturation * (v - gray[i]));
    }
  }
  imageops::clamp01(out);
  return out;
}

Image random_grayscale(const Image& img, std::uint64_t seed) {
  Rng rng(seed);
  if (!rng.bernoulli(kGrayscaleProbability)) return img;
  const auto gray = imageops::luminance(img);
  Image out = img;
  const std::size_t n = out.plane_size();
  for (std::uint32_t c = 0; c < out.channels; ++c) {
    std::copy(gray.begin(), gray.end(), out.pixels.begin() + static_cast<std::ptrdiff_t>(c * n));
  }
  imageops::clamp01(out);
  return out;
}

Image strong_transform(const Sample& x, const AugmentPolicy& policy, std::uint64_t seed) {
  Image out = weak_chain(x.image, policy, derive_seed(seed, {0}));
  for (StrongExtra extra : policy.strong_extras) {
    const std::uint64_t sub = derive_seed(seed, {1 + static_cast<std::uint64_t>(extra)});
    switch (extra) {
      case StrongExtra::color_jitter: out = color_jitter(out, sub); break;
      case StrongExtra::random_grayscale: out = random_grayscale(out, sub); break;
      case StrongExtra::rand_augment:
        out = rand_augment(out, policy.rand_augment_ops, policy.rand_augment_magnitude, sub);
        break;
      case StrongExtra::cutout: out = cutout(out, sub); break;
    }
  }
  imageops::clamp01(out);
  return out;
}

std::uint64_t view_seed(std::uint64_t iteration_seed, std::uint64_t sample_id, ViewTag tag) {
  return derive_seed(iteration_seed, {sample_id, static_cast<std::uint64_t>(tag)});
}

ViewPair make_pair(const Sample& x, const AugmentPolicy& policy, std::uint64_t iteration_seed) {
  return ViewPair{
      .weak = weak_transform(x, policy, view_seed(iteration_seed, x.id, ViewTag::weak)),
      .strong = strong_transform(x, policy, view_seed(iteration_seed, x.id, ViewTag::strong)),
      .origin_id = x.id,
  };
}

}  // namespace con2da
