#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "con2da/data.hpp"
#include "con2da/errors.hpp"

namespace con2da {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kPointsPerCloud = 48;
constexpr double kSplatSigmaPx = 0.8;
constexpr double kBlobSpread = 0.12;
constexpr double kPixelNoise = 0.03;
constexpr std::array<double, 3> kBaseTint{0.85, 0.55, 0.35};
constexpr double kTintJitter = 0.1;
constexpr double kPhaseJitter = 1.0;  // radians

// Geometric part of the target shift, applied in rendering coordinates so rotated or
// translated content has no resampling border artefacts.
struct RenderShift {
  double rotation_deg = 0.0;
  double translate_px = 0.0;
};

std::array<double, 3> draw_tint(Rng& rng) {
  std::array<double, 3> tint{};
  for (std::size_t c = 0; c < 3; ++c) tint[c] = kBaseTint[c] + rng.uniform(-kTintJitter, kTintJitter);
  return tint;
}

// Writes `intensity` (one plane, values in [0, 1]) into every channel with a tint and
// independent pixel noise.
Image colorize(const ShiftSpec& spec, const std::vector<double>& intensity, Rng& rng) {
  const auto tint = draw_tint(rng);
  Image img(spec.channels, spec.height, spec.width);
  const std::size_t n = img.plane_size();
  for (std::uint32_t c = 0; c < spec.channels; ++c) {
    const double t = tint[c % 3];
    for (std::size_t i = 0; i < n; ++i) {
      img.pixels[c * n + i] = static_cast<float>(intensity[i] * t + kPixelNoise * rng.normal());
    }
  }
  imageops::clamp01(img);
  return img;
}

// Point in unit coordinates [-1, 1]^2 (y down) -> pixel coordinates after the shift.
std::array<double, 2> to_pixels(const ShiftSpec& spec, double u, double v, const RenderShift& shift) {
  const double th = shift.rotation_deg * kPi / 180.0;
  const double ru = std::cos(th) * u - std::sin(th) * v;
  const double rv = std::sin(th) * u + std::cos(th) * v;
  const double px = (ru + 1.0) / 2.0 * (spec.width - 1) + shift.translate_px;
  const double py = (rv + 1.0) / 2.0 * (spec.height - 1);
  return {px, py};
}

std::vector<double> splat(const ShiftSpec& spec, const std::vector<std::array<double, 2>>& pts) {
  std::vector<double> plane(std::size_t{spec.height} * spec.width, 0.0);
  const double inv = 1.0 / (2.0 * kSplatSigmaPx * kSplatSigmaPx);
  for (const auto& p : pts) {
    for (std::uint32_t y = 0; y < spec.height; ++y) {
      for (std::uint32_t x = 0; x < spec.width; ++x) {
        const double dx = x - p[0], dy = y - p[1];
        plane[y * spec.width + x] += std::exp(-(dx * dx + dy * dy) * inv);
      }
    }
  }
  const double mx = *std::max_element(plane.begin(), plane.end());
  if (mx > 0.0) {
    for (double& v : plane) v /= mx;
  }
  return plane;
}

std::vector<double> two_moons_plane(const ShiftSpec& spec, int label, Rng& rng,
                                    const RenderShift& shift) {
  // Classes come in interleaved moon pairs; pair j is rotated by pi * j / pairs. Every
  // other point is mirrored left-right so a horizontal flip preserves the class.
  const std::size_t pairs = (spec.num_classes + 1) / 2;
  const double pair_angle = kPi * static_cast<double>(label / 2) / static_cast<double>(pairs);
  const double ca = std::cos(pair_angle), sa = std::sin(pair_angle);
  std::vector<std::array<double, 2>> pts;
  for (std::size_t i = 0; i < kPointsPerCloud; ++i) {
    const double t = rng.uniform(0.0, kPi);
    double x = label % 2 == 0 ? std::cos(t) : 1.0 - std::cos(t);
    double y = label % 2 == 0 ? std::sin(t) : 0.5 - std::sin(t);
    x = (x - 0.5 + 0.08 * rng.normal()) * 0.55;
    y = -(y - 0.25 + 0.08 * rng.normal()) * 0.55;
    const double side = i % 2 == 0 ? 1.0 : -1.0;
    pts.push_back(to_pixels(spec, side * (ca * x - sa * y), sa * x + ca * y, shift));
  }
  return splat(spec, pts);
}

// Class k is a mirrored pair of blobs at (+-0.5 cos a_k, 0.5 sin a_k), with a_k spread
// over (-pi/2, pi/2), so a horizontal flip maps every class onto itself.
std::vector<double> blobs_plane(const ShiftSpec& spec, int label, Rng& rng,
                                const RenderShift& shift) {
  const double angle = -kPi / 2.0 + kPi * (label + 0.5) / static_cast<double>(spec.num_classes);
  const double cx = 0.5 * std::cos(angle), cy = 0.5 * std::sin(angle);
  std::vector<std::array<double, 2>> pts;
  for (std::size_t i = 0; i < kPointsPerCloud; ++i) {
    const double side = i % 2 == 0 ? 1.0 : -1.0;
    pts.push_back(to_pixels(spec, side * cx + kBlobSpread * rng.normal(), cy + kBlobSpread * rng.normal(), shift));
  }
  return splat(spec, pts);
}

// Plaid of a horizontal and a vertical grating. Class k fixes the frequency pair
// (1 + k, K - k) in cycles per image, which a horizontal flip leaves unchanged.
// Phase, frequency jitter, contrast and brightness are nuisance.
std::vector<double> textured_plane(const ShiftSpec& spec, int label, Rng& rng,
                                   const RenderShift& shift) {
  const double k = spec.num_classes;
  const double fx = (1.0 + label) * rng.uniform(0.95, 1.05);
  const double fy = (k - label) * rng.uniform(0.95, 1.05);
  const double phase_x = rng.uniform(-kPhaseJitter, kPhaseJitter);
  const double phase_y = rng.uniform(-kPhaseJitter, kPhaseJitter);
  const double amplitude = rng.uniform(0.3, 0.5);
  const double offset = rng.uniform(0.4, 0.6);
  const double th = shift.rotation_deg * kPi / 180.0;
  const double ct = std::cos(th), st = std::sin(th);
  const double cx = (spec.width - 1) / 2.0 + shift.translate_px;
  const double cy = (spec.height - 1) / 2.0;
  std::vector<double> plane(std::size_t{spec.height} * spec.width);
  for (std::uint32_t y = 0; y < spec.height; ++y) {
    for (std::uint32_t x = 0; x < spec.width; ++x) {
      // Inverse-rotate the pixel into pattern coordinates.
      const double px = x - cx, py = y - cy;
      const double u = (ct * px + st * py) / spec.width;
      const double v = (-st * px + ct * py) / spec.height;
      const double s = 0.5 * std::cos(2.0 * kPi * fx * u + phase_x) +
                       0.5 * std::cos(2.0 * kPi * fy * v + phase_y);
      plane[y * spec.width + x] = std::clamp(offset + amplitude * s, 0.0, 1.0);
    }
  }
  return plane;
}

Image render(const ShiftSpec& spec, int label, Rng& rng, const RenderShift& shift) {
  std::vector<double> plane;
  switch (spec.generator) {
    case Generator::two_moons: plane = two_moons_plane(spec, label, rng, shift); break;
    case Generator::gaussian_blobs: plane = blobs_plane(spec, label, rng, shift); break;
    case Generator::textured_grid: plane = textured_plane(spec, label, rng, shift); break;
  }
  return colorize(spec, plane, rng);
}

}  // namespace

std::string_view to_string(Generator g) {
  switch (g) {
    case Generator::two_moons: return "two_moons";
    case Generator::gaussian_blobs: return "gaussian_blobs";
    case Generator::textured_grid: return "textured_grid";
  }
  return "unknown";
}

std::string_view to_string(ShiftKind k) {
  switch (k) {
    case ShiftKind::rotation: return "rotation";
    case ShiftKind::translation: return "translation";
    case ShiftKind::channel_swap: return "channel_swap";
    case ShiftKind::noise: return "noise";
  }
  return "unknown";
}

Generator parse_generator(std::string_view name) {
  for (auto g : {Generator::two_moons, Generator::gaussian_blobs, Generator::textured_grid}) {
    if (to_string(g) == name) return g;
  }
  throw ConfigError("unknown generator '" + std::string(name) + "'");
}

ShiftKind parse_shift_kind(std::string_view name) {
  for (auto k : {ShiftKind::rotation, ShiftKind::translation, ShiftKind::channel_swap, ShiftKind::noise}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown shift kind '" + std::string(name) + "'");
}

Image render_class_image(const ShiftSpec& spec, int label, Rng& rng) {
  return render(spec, label, rng, RenderShift{});
}

Image apply_shift(const Image& img, ShiftKind kind, double magnitude, Rng& rng) {
  if (magnitude == 0.0) return img;
  Image out = img;
  switch (kind) {
    case ShiftKind::rotation:
      out = imageops::rotate(img, magnitude, imageops::Border::replicate);
      break;
    case ShiftKind::translation:
      out = imageops::warp_affine(img, {1.0, 0.0, -magnitude, 0.0, 1.0, 0.0},
                                  imageops::Border::replicate);
      break;
    case ShiftKind::channel_swap: {
      if (img.channels < 2) break;
      const double m = std::clamp(magnitude, 0.0, 1.0);
      const std::size_t n = img.plane_size();
      for (std::size_t i = 0; i < n; ++i) {
        const double c0 = img.pixels[i], c1 = img.pixels[n + i];
        out.pixels[i] = static_cast<float>((1.0 - m) * c0 + m * c1);
        out.pixels[n + i] = static_cast<float>((1.0 - m) * c1 + m * c0);
      }
      break;
    }
    case ShiftKind::noise:
      for (float& v : out.pixels) v = static_cast<float>(v + magnitude * rng.normal());
      break;
  }
  imageops::clamp01(out);
  return out;
}

SsdaDataset generate_synthetic_ssda(const ShiftSpec& spec, std::size_t shots) {
  const std::size_t k = spec.num_classes;
  if (k == 0) throw ConfigError("generate_synthetic_ssda: num_classes must be positive");
  if (shots == 0) throw ConfigError("generate_synthetic_ssda: shots must be positive");
  if (spec.channels == 0 || spec.height == 0 || spec.width == 0) {
    throw ConfigError("generate_synthetic_ssda: image dimensions must be positive");
  }
  if (!(spec.shift_magnitude >= 0.0)) {
    throw ConfigError("generate_synthetic_ssda: shift_magnitude must be >= 0");
  }
  const std::size_t needed = k * (shots + kValidationPerClass + kMinUnlabeledPerClass);
  if (spec.samples_per_domain < needed) {
    throw ConfigError("generate_synthetic_ssda: samples_per_domain " +
                      std::to_string(spec.samples_per_domain) + " cannot satisfy the splits (need >= " +
                      std::to_string(needed) + ")");
  }

  RenderShift geometric;
  if (spec.shift_kind == ShiftKind::rotation) geometric.rotation_deg = spec.shift_magnitude;
  if (spec.shift_kind == ShiftKind::translation) geometric.translate_px = spec.shift_magnitude;
  const bool pixel_shift =
      spec.shift_kind == ShiftKind::channel_swap || spec.shift_kind == ShiftKind::noise;

  const std::size_t n = spec.samples_per_domain;
  std::vector<Sample> source;
  std::vector<std::vector<Sample>> target_by_class(k);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % k);
    Rng src_rng(derive_seed(spec.seed, {0, i}));
    source.push_back(Sample{.id = i,
                            .image = render(spec, label, src_rng, RenderShift{}),
                            .label = label,
                            .domain = Domain::source});

    Rng tgt_rng(derive_seed(spec.seed, {1, i}));
    Image img = render(spec, label, tgt_rng, geometric);
    if (pixel_shift) img = apply_shift(img, spec.shift_kind, spec.shift_magnitude, tgt_rng);
    target_by_class[static_cast<std::size_t>(label)].push_back(
        Sample{.id = n + i, .image = std::move(img), .label = label, .domain = Domain::target});
  }

  Rng split_rng(derive_seed(spec.seed, {2}));
  std::vector<Sample> labeled, validation, unlabeled;
  for (auto& members : target_by_class) {
    split_rng.shuffle(members.begin(), members.end());
    for (std::size_t j = 0; j < members.size(); ++j) {
      if (j < shots) {
        labeled.push_back(std::move(members[j]));
      } else if (j < shots + kValidationPerClass) {
        validation.push_back(std::move(members[j]));
      } else {
        unlabeled.push_back(std::move(members[j]));
      }
    }
  }
  const auto by_id = [](const Sample& a, const Sample& b) { return a.id < b.id; };
  std::sort(labeled.begin(), labeled.end(), by_id);
  std::sort(validation.begin(), validation.end(), by_id);
  std::sort(unlabeled.begin(), unlabeled.end(), by_id);
  return SsdaDataset(spec.num_classes, std::move(source), std::move(labeled), std::move(unlabeled),
                     std::move(validation));
}

}  // namespace con2da
