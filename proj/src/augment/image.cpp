#include "con2da/image.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace con2da::imageops {

namespace {

// Bilinear sample of channel c at continuous pixel-centre coordinates (sx, sy).
float sample(const Image& src, std::uint32_t c, double sx, double sy, Border border, float fill) {
  const auto h = static_cast<int>(src.height);
  const auto w = static_cast<int>(src.width);
  const double fx = std::floor(sx);
  const double fy = std::floor(sy);
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const double ax = sx - fx;
  const double ay = sy - fy;

  const auto fetch = [&](int y, int x) -> double {
    if (x < 0 || x >= w || y < 0 || y >= h) {
      if (border == Border::constant) return fill;
      x = std::clamp(x, 0, w - 1);
      y = std::clamp(y, 0, h - 1);
    }
    return src.at(c, static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x));
  };

  // Exact hits skip the neighbours entirely so identity warps are bit-exact.
  if (ax == 0.0 && ay == 0.0) return static_cast<float>(fetch(y0, x0));
  const double top = fetch(y0, x0) * (1.0 - ax) + fetch(y0, x0 + 1) * ax;
  const double bottom = fetch(y0 + 1, x0) * (1.0 - ax) + fetch(y0 + 1, x0 + 1) * ax;
  return static_cast<float>(top * (1.0 - ay) + bottom * ay);
}

}  // namespace

Image warp_affine(const Image& src, const Affine& inv, Border border, float fill) {
  Image out(src.channels, src.height, src.width);
  for (std::uint32_t y = 0; y < src.height; ++y) {
    for (std::uint32_t x = 0; x < src.width; ++x) {
      const double sx = inv[0] * x + inv[1] * y + inv[2];
      const double sy = inv[3] * x + inv[4] * y + inv[5];
      for (std::uint32_t c = 0; c < src.channels; ++c) {
        out.at(c, y, x) = sample(src, c, sx, sy, border, fill);
      }
    }
  }
  return out;
}

Affine rotation_inverse(const Image& img, double degrees) {
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  // p = c + R(-theta) (p' - c)
  return {cs, sn, cx - cs * cx - sn * cy, -sn, cs, cy + sn * cx - cs * cy};
}

Image rotate(const Image& src, double degrees, Border border, float fill) {
  if (degrees == 0.0) return src;
  return warp_affine(src, rotation_inverse(src, degrees), border, fill);
}

Image shear_x(const Image& src, double factor, float fill) {
  if (factor == 0.0) return src;
  const double cy = (static_cast<double>(src.height) - 1.0) / 2.0;
  // x' = x + factor * (y - cy)
  return warp_affine(src, {1.0, -factor, factor * cy, 0.0, 1.0, 0.0}, Border::constant, fill);
}

Image shear_y(const Image& src, double factor, float fill) {
  if (factor == 0.0) return src;
  const double cx = (static_cast<double>(src.width) - 1.0) / 2.0;
  return warp_affine(src, {1.0, 0.0, 0.0, -factor, 1.0, factor * cx}, Border::constant, fill);
}

Image translate(const Image& src, double dx, double dy, float fill) {
  if (dx == 0.0 && dy == 0.0) return src;
  return warp_affine(src, {1.0, 0.0, -dx, 0.0, 1.0, -dy}, Border::constant, fill);
}

Image resized_crop(const Image& src, std::uint32_t y0, std::uint32_t x0, std::uint32_t h,
                   std::uint32_t w) {
  if (y0 == 0 && x0 == 0 && h == src.height && w == src.width) return src;
  Image out(src.channels, src.height, src.width);
  const double scale_y = static_cast<double>(h) / src.height;
  const double scale_x = static_cast<double>(w) / src.width;
  for (std::uint32_t y = 0; y < src.height; ++y) {
    const double sy = std::clamp(y0 + (y + 0.5) * scale_y - 0.5, double(y0), double(y0 + h - 1));
    for (std::uint32_t x = 0; x < src.width; ++x) {
      const double sx =
          std::clamp(x0 + (x + 0.5) * scale_x - 0.5, double(x0), double(x0 + w - 1));
      for (std::uint32_t c = 0; c < src.channels; ++c) {
        out.at(c, y, x) = sample(src, c, sx, sy, Border::replicate, 0.0f);
      }
    }
  }
  return out;
}

Image hflip(const Image& src) {
  Image out(src.channels, src.height, src.width);
  for (std::uint32_t c = 0; c < src.channels; ++c) {
    for (std::uint32_t y = 0; y < src.height; ++y) {
      for (std::uint32_t x = 0; x < src.width; ++x) {
        out.at(c, y, x) = src.at(c, y, src.width - 1 - x);
      }
    }
  }
  return out;
}

Image gaussian_blur(const Image& src, double sigma) {
  if (!(sigma > 1e-6)) return src;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;

  const auto h = static_cast<int>(src.height);
  const auto w = static_cast<int>(src.width);
  Image tmp(src.channels, src.height, src.width);
  Image out(src.channels, src.height, src.width);
  for (std::uint32_t c = 0; c < src.channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] * src.at(c, y, std::clamp(x + i, 0, w - 1));
        }
        tmp.at(c, y, x) = static_cast<float>(acc);
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] * tmp.at(c, std::clamp(y + i, 0, h - 1), x);
        }
        out.at(c, y, x) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

std::vector<float> luminance(const Image& img) {
  const std::size_t n = img.plane_size();
  std::vector<float> lum(n, 0.0f);
  if (img.channels == 3) {
    constexpr float w[3] = {0.299f, 0.587f, 0.114f};
    for (std::uint32_t c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < n; ++i) lum[i] += w[c] * img.pixels[c * n + i];
    }
  } else if (img.channels > 0) {
    for (std::uint32_t c = 0; c < img.channels; ++c) {
      for (std::size_t i = 0; i < n; ++i) lum[i] += img.pixels[c * n + i];
    }
    for (float& v : lum) v /= static_cast<float>(img.channels);
  }
  return lum;
}

float channel_mean(const Image& img, std::uint32_t c) {
  const std::size_t n = img.plane_size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += img.pixels[c * n + i];
  return static_cast<float>(acc / static_cast<double>(n));
}

void clamp01(Image& img) {
  for (float& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
}

}  // namespace con2da::imageops
