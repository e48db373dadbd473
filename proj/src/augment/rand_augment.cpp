#include <algorithm>
#include <array>
#include <cmath>

#include "con2da/augment.hpp"
#include "con2da/errors.hpp"
#include "con2da/rng.hpp"

namespace con2da {

namespace {

constexpr double kFactorSpan = 0.9;
constexpr double kShearMax = 0.3;
constexpr double kTranslateMax = 0.45;

std::uint32_t to_level(float v) {
  return static_cast<std::uint32_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

Image auto_contrast(const Image& img) {
  Image out = img;
  const std::size_t n = img.plane_size();
  for (std::uint32_t c = 0; c < img.channels; ++c) {
    const auto first = img.pixels.begin() + static_cast<std::ptrdiff_t>(c * n);
    const auto [lo, hi] = std::minmax_element(first, first + static_cast<std::ptrdiff_t>(n));
    if (*hi <= *lo) continue;
    const float low = *lo, range = *hi - *lo;
    for (std::size_t i = 0; i < n; ++i) out.pixels[c * n + i] = (img.pixels[c * n + i] - low) / range;
  }
  return out;
}

// Histogram equalisation on 256 levels, one channel at a time (PIL's lookup-table rule).
Image equalize(const Image& img) {
  Image out = img;
  const std::size_t n = img.plane_size();
  for (std::uint32_t c = 0; c < img.channels; ++c) {
    std::array<std::size_t, 256> hist{};
    for (std::size_t i = 0; i < n; ++i) ++hist[to_level(img.pixels[c * n + i])];
    std::size_t last = 0;
    for (std::size_t b = 0; b < 256; ++b) {
      if (hist[b]) last = b;
    }
    const std::size_t step = (n - hist[last]) / 255;
    if (step == 0) continue;
    std::array<float, 256> lut{};
    std::size_t acc = step / 2;
    for (std::size_t b = 0; b < 256; ++b) {
      lut[b] = static_cast<float>(std::min<std::size_t>(acc / step, 255)) / 255.0f;
      acc += hist[b];
    }
    for (std::size_t i = 0; i < n; ++i) out.pixels[c * n + i] = lut[to_level(img.pixels[c * n + i])];
  }
  return out;
}

Image solarize(const Image& img, double threshold) {
  Image out = img;
  for (float& v : out.pixels) {
    if (v > threshold) v = 1.0f - v;
  }
  return out;
}

Image posterize(const Image& img, int bits) {
  if (bits >= 8) bits = 8;
  const std::uint32_t mask = ~((1u << (8 - bits)) - 1u) & 0xffu;
  Image out = img;
  for (float& v : out.pixels) v = static_cast<float>(to_level(v) & mask) / 255.0f;
  return out;
}

Image blend(const Image& degenerate, const Image& img, double factor) {
  Image out = img;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = static_cast<float>(degenerate.pixels[i] +
                                       factor * (img.pixels[i] - degenerate.pixels[i]));
  }
  return out;
}

Image adjust_contrast(const Image& img, double factor) {
  if (factor == 1.0) return img;
  const auto lum = imageops::luminance(img);
  double mean = 0.0;
  for (float v : lum) mean += v;
  mean /= static_cast<double>(lum.size());
  return blend(Image(img.channels, img.height, img.width, static_cast<float>(mean)), img, factor);
}

Image adjust_brightness(const Image& img, double factor) {
  if (factor == 1.0) return img;
  return blend(Image(img.channels, img.height, img.width, 0.0f), img, factor);
}

Image adjust_sharpness(const Image& img, double factor) {
  if (factor == 1.0 || img.height < 3 || img.width < 3) return img;
  Image smooth = img;
  for (std::uint32_t c = 0; c < img.channels; ++c) {
    for (std::uint32_t y = 1; y + 1 < img.height; ++y) {
      for (std::uint32_t x = 1; x + 1 < img.width; ++x) {
        double acc = 4.0 * img.at(c, y, x);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) acc += img.at(c, y + dy, x + dx);
        }
        smooth.at(c, y, x) = static_cast<float>(acc / 13.0);
      }
    }
  }
  return blend(smooth, img, factor);
}

}  // namespace

std::string_view to_string(RandAugmentOp op) {
  switch (op) {
    case RandAugmentOp::identity: return "identity";
    case RandAugmentOp::auto_contrast: return "auto_contrast";
    case RandAugmentOp::equalize: return "equalize";
    case RandAugmentOp::rotate: return "rotate";
    case RandAugmentOp::solarize: return "solarize";
    case RandAugmentOp::posterize: return "posterize";
    case RandAugmentOp::contrast: return "contrast";
    case RandAugmentOp::brightness: return "brightness";
    case RandAugmentOp::sharpness: return "sharpness";
    case RandAugmentOp::shear_x: return "shear_x";
    case RandAugmentOp::shear_y: return "shear_y";
    case RandAugmentOp::translate_x: return "translate_x";
    case RandAugmentOp::translate_y: return "translate_y";
  }
  return "unknown";
}

std::vector<RandAugmentDraw> draw_rand_augment_ops(int num_ops, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RandAugmentDraw> draws;
  for (int i = 0; i < num_ops; ++i) {
    const auto op = static_cast<RandAugmentOp>(rng.index(kRandAugmentOpCount));
    const bool negate = rng.bernoulli(0.5);
    draws.push_back({op, negate});
  }
  return draws;
}

Image apply_rand_augment_op(const Image& img, RandAugmentOp op, int magnitude, bool negate) {
  if (magnitude < 0 || magnitude > kMaxMagnitude) {
    throw InvalidHyperparameter("rand_augment: magnitude must lie in [0, 30], got " +
                                std::to_string(magnitude));
  }
  const double level = static_cast<double>(magnitude) / kMaxMagnitude;
  const double sign = negate ? -1.0 : 1.0;
  Image out;
  switch (op) {
    case RandAugmentOp::identity: out = img; break;
    case RandAugmentOp::auto_contrast: out = auto_contrast(img); break;
    case RandAugmentOp::equalize: out = equalize(img); break;
    case RandAugmentOp::rotate:
      out = imageops::rotate(img, sign * kRotateMaxDegrees * level, imageops::Border::constant, kRandAugmentFill);
      break;
    case RandAugmentOp::solarize: out = solarize(img, 1.0 - level); break;
    case RandAugmentOp::posterize:
      out = posterize(img, 8 - static_cast<int>(std::lround(4.0 * level)));
      break;
    case RandAugmentOp::contrast: out = adjust_contrast(img, 1.0 + sign * kFactorSpan * level); break;
    case RandAugmentOp::brightness:
      out = adjust_brightness(img, 1.0 + sign * kFactorSpan * level);
      break;
    case RandAugmentOp::sharpness:
      out = adjust_sharpness(img, 1.0 + sign * kFactorSpan * level);
      break;
    case RandAugmentOp::shear_x: out = imageops::shear_x(img, sign * kShearMax * level, kRandAugmentFill); break;
    case RandAugmentOp::shear_y: out = imageops::shear_y(img, sign * kShearMax * level, kRandAugmentFill); break;
    case RandAugmentOp::translate_x:
      out = imageops::translate(img, sign * kTranslateMax * level * img.width, 0.0, kRandAugmentFill);
      break;
    case RandAugmentOp::translate_y:
      out = imageops::translate(img, 0.0, sign * kTranslateMax * level * img.height, kRandAugmentFill);
      break;
  }
  imageops::clamp01(out);
  return out;
}

Image rand_augment(const Image& img, int num_ops, int magnitude, std::uint64_t seed) {
  if (num_ops < 1) {
    throw InvalidHyperparameter("rand_augment: operation count H must be >= 1, got " +
                                std::to_string(num_ops));
  }
  if (magnitude < 0 || magnitude > kMaxMagnitude) {
    throw InvalidHyperparameter("rand_augment: magnitude must lie in [0, 30], got " +
                                std::to_string(magnitude));
  }
  Image out = img;
  for (const RandAugmentDraw& d : draw_rand_augment_ops(num_ops, seed)) {
    out = apply_rand_augment_op(out, d.op, magnitude, d.negate);
  }
  return out;
}

}  // namespace con2da
