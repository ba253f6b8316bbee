#pragma once

// The full detector: MIL head plus refinement stack, and the summed training
// objective (image-level loss plus one loss per refinement head) with its gradient.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "wsod/mil.hpp"
#include "wsod/oicr.hpp"

namespace wsod {

struct DetectorParams {
  MilHead mil;
  RefinementStack refine;

  DetectorParams() = default;
  DetectorParams(std::size_t feature_dim, std::size_t num_classes, std::size_t refinements,
                 double oicr_iou = 0.5)
      : mil(feature_dim, num_classes), refine(refinements, feature_dim, num_classes, oicr_iou) {}

  std::size_t feature_dim() const { return mil.cls.in_dim(); }
  std::size_t num_classes() const { return mil.num_classes(); }

  // Small symmetric weights (scale 1/sqrt(d)), zero biases.
  void init(std::uint64_t seed);
  DetectorParams zeros_like() const;

  // Visits every parameter array in a fixed order.
  void for_each_array(const std::function<void(std::span<double>)>& fn);
  void for_each_array(const std::function<void(std::span<const double>)>& fn) const;
  std::size_t parameter_count() const;

  friend bool operator==(const DetectorParams&, const DetectorParams&) = default;
};

struct LossBreakdown {
  double mid = 0.0;
  std::vector<double> refinement;  // one per head
  double total = 0.0;
};

// Pseudo instance targets for every head, computed from the current scores
// and treated as constants by the gradient.
std::vector<Matrix> refinement_targets(const ProposalSet& proposals, const LabelSet& labels,
                                       const DetectorParams& params);

// Evaluates the objective and, when `grad` is non-null, accumulates its gradient.
// When `targets` is given it replaces the targets derived from the current scores.
LossBreakdown detector_objective(const ProposalSet& proposals, const LabelSet& labels,
                                 const DetectorParams& params, DetectorParams* grad,
                                 const std::vector<Matrix>* targets = nullptr);

}  // namespace wsod
