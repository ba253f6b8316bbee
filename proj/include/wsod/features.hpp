#pragma once

// Toy feature provider used in place of a pretrained backbone: a 3x3 mean
// filter, then colour-opponent channels (affine map of RGB with ReLU), then
// region pooling per proposal.
//
// Per box and channel the pooled feature holds the mean response inside the
// box, inside its central half, in a surrounding ring a quarter of the box
// size wide, and the edge energy per unit perimeter in a band around the box
// outline, and the share of the channel's whole-image response that lies in
// the box; two trailing entries encode the box's relative area. All entries
// are scaled by a fixed gain, the edge and share blocks by twice as much.

#include <cstdint>
#include <span>
#include <vector>

#include "wsod/box.hpp"
#include "wsod/image.hpp"
#include "wsod/tensor.hpp"

namespace wsod {

class ToyFeatureProvider {
 public:
  explicit ToyFeatureProvider(std::size_t channels = 12, std::uint64_t seed = 7);

  std::size_t channels() const { return filter_weights_.rows; }
  std::uint64_t seed() const { return seed_; }
  std::size_t feature_dim() const { return 5 * channels() + 2; }

  // Features for `boxes` given in the image's own pixel coordinates.
  Matrix extract(const Image& image, std::span<const Box> boxes) const;

  // Resizes the image by `factor` (and the boxes with it) before extraction.
  Matrix extract_scaled(const Image& image, std::span<const Box> boxes, double factor) const;

 private:
  Matrix filter_weights_;      // channels x 3
  std::vector<double> biases_; // channels
  std::uint64_t seed_;
};

// Deterministic multi-scale grid: for each level n = 1..grid the n x n cells,
// and for n >= 3 also every 2 x 2 block of adjacent cells. Capped at `max_proposals`.
std::vector<Box> grid_proposals(int width, int height, int grid, std::size_t max_proposals = 500);

}  // namespace wsod
