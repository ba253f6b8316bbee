#include "wsod/features.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "wsod/error.hpp"

namespace wsod {

namespace {

// Summed-area table with a zero first row and column.
struct Integral {
  int w = 0, h = 0;
  std::vector<double> sum;

  double at(int x, int y) const { return sum[static_cast<std::size_t>(y) * (w + 1) + x]; }
  // Sum over pixels [x0, x1) x [y0, y1).
  double rect(int x0, int y0, int x1, int y1) const {
    if (x1 <= x0 || y1 <= y0) return 0.0;
    return at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
  }
};

struct PixelRect {
  int x0, y0, x1, y1;
  double area() const { return std::max(0, x1 - x0) * static_cast<double>(std::max(0, y1 - y0)); }
};

PixelRect to_pixels(double x1, double y1, double x2, double y2, int w, int h) {
  PixelRect r{static_cast<int>(std::floor(x1)), static_cast<int>(std::floor(y1)),
              static_cast<int>(std::ceil(x2)), static_cast<int>(std::ceil(y2))};
  r.x0 = std::clamp(r.x0, 0, w);
  r.x1 = std::clamp(r.x1, 0, w);
  r.y0 = std::clamp(r.y0, 0, h);
  r.y1 = std::clamp(r.y1, 0, h);
  if (r.x1 <= r.x0 && r.x0 < w) r.x1 = r.x0 + 1;
  if (r.y1 <= r.y0 && r.y0 < h) r.y1 = r.y0 + 1;
  return r;
}

constexpr double kCoverageDamping = 0.01;
constexpr double kChannelGain = 4.0;
constexpr double kChannelThreshold = 0.3;
// Output scaling; the boundary blocks (edge band, coverage) get extra weight.
constexpr double kFeatureGain = 4.0;
constexpr double kBoundaryGain = 2.0;

}  // namespace

ToyFeatureProvider::ToyFeatureProvider(std::size_t channels, std::uint64_t seed)
    : filter_weights_(channels, 3), biases_(channels), seed_(seed) {
  // Colour-opponent channels: ReLU(gain * u . rgb - threshold) for unit hue
  // directions u in the chroma plane (orthogonal to grey), evenly spaced with
  // a seeded jitter. Grey pixels give no response.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.25, 0.25);
  const double e1[3] = {1 / std::sqrt(2.0), -1 / std::sqrt(2.0), 0.0};
  const double e2[3] = {1 / std::sqrt(6.0), 1 / std::sqrt(6.0), -2 / std::sqrt(6.0)};
  const double pi = std::acos(-1.0);
  for (std::size_t f = 0; f < channels; ++f) {
    const double theta = 2.0 * pi * (static_cast<double>(f) + jitter(rng)) / static_cast<double>(channels);
    for (std::size_t c = 0; c < 3; ++c)
      filter_weights_(f, c) = kChannelGain * (std::cos(theta) * e1[c] + std::sin(theta) * e2[c]);
    biases_[f] = -kChannelThreshold;
  }
}

Matrix ToyFeatureProvider::extract(const Image& image, std::span<const Box> boxes) const {
  const int w = image.width, h = image.height;
  const std::size_t F = channels();
  if (w <= 0 || h <= 0) throw ShapeMismatch("extract: empty image");

  // 3x3 mean filter (edge-clamped) followed by the per-channel affine + ReLU.
  std::vector<double> blurred(3 * static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            acc += image.at(std::clamp(x + dx, 0, w - 1), std::clamp(y + dy, 0, h - 1))[c];
        blurred[3 * (static_cast<std::size_t>(y) * w + x) + static_cast<std::size_t>(c)] = acc / 9.0;
      }

  // Per channel: activation map, its edge magnitude, and integral images of both.
  std::vector<Integral> integrals(F), edges(F);
  std::vector<double> act(static_cast<std::size_t>(w) * h);
  for (std::size_t f = 0; f < F; ++f) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double* px = &blurred[3 * (static_cast<std::size_t>(y) * w + x)];
        double a = biases_[f];
        for (std::size_t c = 0; c < 3; ++c) a += filter_weights_(f, c) * px[c];
        act[static_cast<std::size_t>(y) * w + x] = std::max(a, 0.0);
      }
    auto fill = [&](Integral& I, auto&& value) {
      I.w = w;
      I.h = h;
      I.sum.assign(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
      for (int y = 0; y < h; ++y) {
        double row = 0.0;
        for (int x = 0; x < w; ++x) {
          row += value(x, y);
          I.sum[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] = I.at(x + 1, y) + row;
        }
      }
    };
    auto A = [&](int x, int y) { return act[static_cast<std::size_t>(y) * w + x]; };
    fill(integrals[f], A);
    fill(edges[f], [&](int x, int y) {
      const double gx = x + 1 < w ? std::fabs(A(x + 1, y) - A(x, y)) : 0.0;
      const double gy = y + 1 < h ? std::fabs(A(x, y + 1) - A(x, y)) : 0.0;
      return gx + gy;
    });
  }

  Matrix out(boxes.size(), feature_dim());
  const double image_area = static_cast<double>(w) * h;
  std::vector<double> totals(F);
  for (std::size_t f = 0; f < F; ++f) totals[f] = integrals[f].rect(0, 0, w, h);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    const double bw = b.width(), bh = b.height();
    const auto inside = to_pixels(b.x1, b.y1, b.x2, b.y2, w, h);
    const auto center = to_pixels(b.x1 + bw / 4, b.y1 + bh / 4, b.x2 - bw / 4, b.y2 - bh / 4, w, h);
    const auto outer = to_pixels(b.x1 - bw / 4, b.y1 - bh / 4, b.x2 + bw / 4, b.y2 + bh / 4, w, h);
    const double ring_area = outer.area() - inside.area();
    // Band straddling the box outline.
    const auto band_out = to_pixels(b.x1 - bw / 8, b.y1 - bh / 8, b.x2 + bw / 8, b.y2 + bh / 8, w, h);
    const auto band_in = to_pixels(b.x1 + bw / 8, b.y1 + bh / 8, b.x2 - bw / 8, b.y2 - bh / 8, w, h);
    const double band_area = band_out.area() - band_in.area();
    auto row = out.row(i);
    for (std::size_t f = 0; f < F; ++f) {
      const auto& I = integrals[f];
      const double s_in = I.rect(inside.x0, inside.y0, inside.x1, inside.y1);
      const double s_center = I.rect(center.x0, center.y0, center.x1, center.y1);
      const double s_outer = I.rect(outer.x0, outer.y0, outer.x1, outer.y1);
      row[f] = inside.area() > 0 ? s_in / inside.area() : 0.0;
      row[F + f] = center.area() > 0 ? s_center / center.area() : 0.0;
      row[2 * F + f] = ring_area > 0 ? (s_outer - s_in) / ring_area : 0.0;
      const auto& E = edges[f];
      const double s_band = E.rect(band_out.x0, band_out.y0, band_out.x1, band_out.y1) -
                            E.rect(band_in.x0, band_in.y0, band_in.x1, band_in.y1);
      // Edge energy per unit of perimeter, so the value does not shrink with box size.
      const double perimeter = 2.0 * ((band_out.x1 - band_out.x0) + (band_out.y1 - band_out.y0));
      row[3 * F + f] = band_area > 0 && perimeter > 0 ? s_band / perimeter : 0.0;
      // Share of the channel's total response captured by the box; damped so
      // that channels silent over the whole image stay near zero.
      row[4 * F + f] = s_in / (totals[f] + kCoverageDamping * image_area);
    }
    const double rel = std::clamp(b.area() / image_area, 0.0, 1.0);
    row[5 * F] = rel;
    row[5 * F + 1] = std::sqrt(rel);
    for (std::size_t k = 0; k < row.size(); ++k) {
      const bool boundary = k >= 3 * F && k < 5 * F;
      row[k] *= boundary ? kFeatureGain * kBoundaryGain : kFeatureGain;
    }
  }
  return out;
}

Matrix ToyFeatureProvider::extract_scaled(const Image& image, std::span<const Box> boxes, double factor) const {
  if (factor == 1.0) return extract(image, boxes);
  const int w = std::max(1, static_cast<int>(std::lround(image.width * factor)));
  const int h = std::max(1, static_cast<int>(std::lround(image.height * factor)));
  const double fx = static_cast<double>(w) / image.width;
  const double fy = static_cast<double>(h) / image.height;
  std::vector<Box> scaled;
  scaled.reserve(boxes.size());
  for (const auto& b : boxes) scaled.push_back({b.x1 * fx, b.y1 * fy, b.x2 * fx, b.y2 * fy});
  return extract(resize(image, w, h), scaled);
}

std::vector<Box> grid_proposals(int width, int height, int grid, std::size_t max_proposals) {
  if (grid < 1) throw ConfigError("grid_proposals: grid must be >= 1");
  std::vector<Box> out;
  auto push = [&](const Box& b) {
    if (out.size() < max_proposals) out.push_back(b);
  };
  for (int n = 1; n <= grid; ++n) {
    const double cw = static_cast<double>(width) / n, ch = static_cast<double>(height) / n;
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) push({c * cw, r * ch, (c + 1) * cw, (r + 1) * ch});
    if (n >= 3)
      for (int r = 0; r + 1 < n; ++r)
        for (int c = 0; c + 1 < n; ++c) push({c * cw, r * ch, (c + 2) * cw, (r + 2) * ch});
  }
  return out;
}

}  // namespace wsod
