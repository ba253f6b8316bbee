#pragma once

// Online instance classifier refinement: K stacked (C+1)-way heads, each
// supervised by pseudo instance labels derived from its predecessor's scores.

#include <span>
#include <vector>

#include "wsod/box.hpp"
#include "wsod/caption.hpp"
#include "wsod/mil.hpp"
#include "wsod/tensor.hpp"

namespace wsod {

struct RefinementStack {
  std::vector<AffineLayer> heads;  // each feature_dim -> C + 1, background last
  double iou_threshold = 0.5;

  RefinementStack() = default;
  RefinementStack(std::size_t count, std::size_t feature_dim, std::size_t num_classes,
                  double threshold = 0.5)
      : heads(count, AffineLayer(feature_dim, num_classes + 1)), iou_threshold(threshold) {}

  std::size_t size() const { return heads.size(); }
  friend bool operator==(const RefinementStack&, const RefinementStack&) = default;
};

// Per-proposal softmax over the C + 1 outputs of one head. Throws NonFiniteScore.
Matrix refine_scores(const ProposalSet& proposals, const AffineLayer& head);

// Pseudo instance labels. For each present class the top-scoring proposal
// (lowest index on ties) and every proposal with IoU above `threshold` to it
// become foreground for that class; rows with no foreground are background;
// each row is then normalized to sum to one. `scores` is m x (C + 1).
Matrix generate_instance_targets(std::span<const Box> boxes, const Matrix& scores,
                                 const LabelSet& labels, double threshold);

// -(1/m) sum_i sum_c targets(i, c) * log(max(scores(i, c), eps))
double oicr_loss(const Matrix& scores, const Matrix& targets);

// Gradient of oicr_loss with respect to the head's logits (scores = softmax(logits)).
Matrix oicr_loss_backward(const Matrix& scores, const Matrix& targets);

double total_loss(double mid, std::span<const double> refinement_losses);

enum class ScoreAggregation { mean_of_heads, last_head };

// Final m x C detection scores: refinement foreground columns averaged over the
// heads (or the last head only). With no heads, the initial cls_probs * det_probs scores.
Matrix inference_scores(const ProposalSet& proposals, const ScoreBundle& mil,
                        const RefinementStack& stack,
                        ScoreAggregation mode = ScoreAggregation::mean_of_heads);

}  // namespace wsod
