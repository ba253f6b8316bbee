#pragma once

// Seeded random instances for property tests and oracle comparisons.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wsod/box.hpp"
#include "wsod/caption.hpp"
#include "wsod/eval.hpp"
#include "wsod/tensor.hpp"

namespace wsod::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Box inside [0, extent]^2 with sides at least min_side.
inline Box random_box(Rng& rng, double extent = 100.0, double min_side = 1.0) {
  const double x1 = uniform(rng, 0.0, extent - min_side), y1 = uniform(rng, 0.0, extent - min_side);
  return {x1, y1, uniform(rng, x1 + min_side, extent), uniform(rng, y1 + min_side, extent)};
}

// Integer-coordinate boxes on a small grid, so exact IoU ties and duplicates occur.
inline Box random_grid_box(Rng& rng, int extent = 12) {
  const int x1 = static_cast<int>(uniform_index(rng, 0, extent - 1));
  const int y1 = static_cast<int>(uniform_index(rng, 0, extent - 1));
  const int x2 = static_cast<int>(uniform_index(rng, x1 + 1, extent));
  const int y2 = static_cast<int>(uniform_index(rng, y1 + 1, extent));
  return {double(x1), double(y1), double(x2), double(y2)};
}

inline std::vector<Box> random_boxes(Rng& rng, std::size_t n, bool grid = false) {
  std::vector<Box> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(grid ? random_grid_box(rng) : random_box(rng));
  return out;
}

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = uniform(rng, lo, hi);
  return m;
}

// Row-stochastic scores; with `coarse` the entries come from a few levels so ties happen.
inline Matrix random_stochastic_rows(Rng& rng, std::size_t rows, std::size_t cols, bool coarse = false) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      m(i, c) = coarse ? double(uniform_index(rng, 1, 4)) : uniform(rng, 0.01, 1.0);
      sum += m(i, c);
    }
    for (std::size_t c = 0; c < cols; ++c) m(i, c) /= sum;
  }
  return m;
}

inline LabelSet random_label_set(Rng& rng, std::size_t num_classes, double p = 0.5, bool nonempty = false) {
  LabelSet s;
  s.provenance = Provenance::gold;
  for (std::size_t c = 0; c < num_classes; ++c)
    if (uniform(rng, 0.0, 1.0) < p) s.present.insert(static_cast<int>(c));
  if (nonempty && s.present.empty()) s.present.insert(static_cast<int>(uniform_index(rng, 0, num_classes - 1)));
  return s;
}

inline AffineLayer random_affine(Rng& rng, std::size_t in, std::size_t out, double scale = 1.0) {
  AffineLayer l(in, out);
  for (double& w : l.weight.data) w = uniform(rng, -scale, scale);
  for (double& b : l.bias) b = uniform(rng, -scale, scale);
  return l;
}

// Detections and ground truth over `images` images of one class, on a coarse grid.
struct DetectionInstance {
  std::vector<Detection> dets;
  std::vector<GroundTruthBox> gts;
};

inline DetectionInstance random_detection_instance(Rng& rng, std::size_t max_dets, std::size_t max_gts,
                                                   std::size_t images = 2, int cls = 0) {
  DetectionInstance inst;
  const auto n_gt = uniform_index(rng, 0, max_gts), n_det = uniform_index(rng, 0, max_dets);
  for (std::size_t g = 0; g < n_gt; ++g)
    inst.gts.push_back({"img" + std::to_string(uniform_index(rng, 0, images - 1)), random_grid_box(rng, 8), cls});
  for (std::size_t d = 0; d < n_det; ++d) {
    Detection det{"img" + std::to_string(uniform_index(rng, 0, images - 1)), random_grid_box(rng, 8), cls,
                  double(uniform_index(rng, 1, 6)) / 6.0};
    // Half the detections copy or jitter a ground-truth box so that matches are common.
    if (!inst.gts.empty() && uniform(rng, 0.0, 1.0) < 0.5) {
      const auto& g = inst.gts[uniform_index(rng, 0, inst.gts.size() - 1)];
      det.image_id = g.image_id;
      det.box = g.box;
      if (uniform(rng, 0.0, 1.0) < 0.5) det.box.x2 = std::max(det.box.x1 + 1.0, det.box.x2 - 1.0);
    }
    inst.dets.push_back(det);
  }
  return inst;
}

}  // namespace wsod::testing
