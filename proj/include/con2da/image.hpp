#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace con2da {

/// Planar float image, [channels, height, width], values nominally in [0, 1].
struct Image {
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(std::uint32_t c, std::uint32_t h, std::uint32_t w, float fill = 0.0f)
      : channels(c), height(h), width(w), pixels(std::size_t{c} * h * w, fill) {}

  std::size_t plane_size() const { return std::size_t{height} * width; }
  float& at(std::uint32_t c, std::uint32_t y, std::uint32_t x) {
    return pixels[c * plane_size() + std::size_t{y} * width + x];
  }
  float at(std::uint32_t c, std::uint32_t y, std::uint32_t x) const {
    return pixels[c * plane_size() + std::size_t{y} * width + x];
  }
  bool same_shape(const Image& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  friend bool operator==(const Image&, const Image&) = default;
};

// Low-level pixel operations shared by the augmentation pipelines and the synthetic
// generators. Geometric ops map output pixel centres back into the source with an
// inverse affine transform and sample bilinearly.
namespace imageops {

enum class Border { constant, replicate };

/// Inverse affine map: source = [a b c; d e f] * (x, y, 1) in pixel-centre coordinates.
using Affine = std::array<double, 6>;

Image warp_affine(const Image& src, const Affine& inverse, Border border, float fill = 0.0f);
/// Rotation about the image centre. A source pixel at p = (x, y), y pointing down, lands at
/// centre + R(degrees) * (p - centre) with R = [cos -sin; sin cos].
Image rotate(const Image& src, double degrees, Border border, float fill = 0.0f);
Affine rotation_inverse(const Image& img, double degrees);
Image shear_x(const Image& src, double factor, float fill = 0.0f);
Image shear_y(const Image& src, double factor, float fill = 0.0f);
Image translate(const Image& src, double dx, double dy, float fill = 0.0f);

/// Crops the integer window [y0, y0+h) x [x0, x0+w) and resizes it back to the source
/// dimensions with bilinear interpolation. A full-size window is an exact copy.
Image resized_crop(const Image& src, std::uint32_t y0, std::uint32_t x0, std::uint32_t h,
                   std::uint32_t w);
Image hflip(const Image& src);
/// Separable Gaussian blur with replicated borders; sigma <= 1e-6 is the identity.
Image gaussian_blur(const Image& src, double sigma);

/// Per-pixel luminance (ITU-R 601 weights for 3 channels, channel mean otherwise).
std::vector<float> luminance(const Image& img);
float channel_mean(const Image& img, std::uint32_t c);
void clamp01(Image& img);

}  // namespace imageops

}  // namespace con2da
