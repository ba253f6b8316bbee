#pragma once

// Two-stream multiple-instance detection head.
//
//   cls_logits = X W_cls^T + b_cls       det_logits = X W_det^T + b_det   (m x C)
//   cls_probs = sigmoid(cls_logits)      det_probs = softmax over proposals of det_logits
//   image_probs(c) = sigmoid(sum_i det_probs(i,c) * cls_logits(i,c))
//
// The image-level score aggregates logits, not probabilities.

#include <span>
#include <string>
#include <vector>

#include "wsod/box.hpp"
#include "wsod/caption.hpp"
#include "wsod/tensor.hpp"

namespace wsod {

inline constexpr std::size_t kMaxProposals = 500;
inline constexpr double kProbEpsilon = 1e-8;

struct ProposalSet {
  std::string image_id;
  std::vector<Box> boxes;
  Matrix features;  // one row per box

  std::size_t size() const { return boxes.size(); }
  // Throws ShapeMismatch / NonFiniteScore when an invariant is broken.
  void validate(std::size_t max_proposals = kMaxProposals) const;
};

struct MilHead {
  AffineLayer cls;
  AffineLayer det;

  MilHead() = default;
  MilHead(std::size_t feature_dim, std::size_t num_classes)
      : cls(feature_dim, num_classes), det(feature_dim, num_classes) {}

  std::size_t num_classes() const { return cls.out_dim(); }
  friend bool operator==(const MilHead&, const MilHead&) = default;
};

struct ScoreBundle {
  Matrix cls_logits, det_logits;
  Matrix cls_probs, det_probs;
  std::vector<double> pooled_logits;  // sum_i det_probs * cls_logits, per class
  std::vector<double> image_probs;

  std::size_t num_proposals() const { return cls_logits.rows; }
  std::size_t num_classes() const { return cls_logits.cols; }
};

// Throws NonFiniteScore if any output is not finite.
ScoreBundle mil_forward(const ProposalSet& proposals, const MilHead& head);

// -sum_c [y log image_probs + (1 - y) log(1 - image_probs)], probabilities clamped to [eps, 1 - eps].
double mid_loss(const ScoreBundle& scores, std::span<const double> targets);
double mid_loss(const ScoreBundle& scores, const LabelSet& labels);

// dL/d(cls_logits) and dL/d(det_logits) for mid_loss; the clamp has zero derivative.
void mid_loss_backward(const ScoreBundle& scores, std::span<const double> targets, Matrix& d_cls_logits,
                       Matrix& d_det_logits);

// score(i, c) = cls_probs(i, c) * det_probs(i, c) for c < C; column C (background) is zero.
Matrix initial_detection_scores(const ScoreBundle& scores);

}  // namespace wsod
