#include "wsod/mil.hpp"

#include <algorithm>
#include <cmath>

#include "wsod/error.hpp"
#include "wsod/kernels.hpp"

namespace wsod {

void ProposalSet::validate(std::size_t max_proposals) const {
  if (boxes.empty()) throw ShapeMismatch("image " + image_id + " has no proposals");
  if (boxes.size() > max_proposals)
    throw ShapeMismatch("image " + image_id + " has " + std::to_string(boxes.size()) + " proposals, limit " +
                        std::to_string(max_proposals));
  if (features.rows != boxes.size())
    throw ShapeMismatch("image " + image_id + ": feature rows do not match proposal count");
  for (const auto& b : boxes)
    if (!b.valid()) throw ShapeMismatch("image " + image_id + " has a degenerate proposal box");
  if (!all_finite(features.data)) throw NonFiniteScore("image " + image_id + " has non-finite features");
}

ScoreBundle mil_forward(const ProposalSet& proposals, const MilHead& head) {
  ScoreBundle s;
  kernels::omp::affine_forward(proposals.features, head.cls, s.cls_logits);
  kernels::omp::affine_forward(proposals.features, head.det, s.det_logits);
  s.cls_probs = Matrix(s.cls_logits.rows, s.cls_logits.cols);
  std::transform(s.cls_logits.data.begin(), s.cls_logits.data.end(), s.cls_probs.data.begin(), sigmoid);
  kernels::omp::softmax_columns(s.det_logits, s.det_probs);

  const std::size_t m = s.cls_logits.rows, C = s.cls_logits.cols;
  s.pooled_logits.assign(C, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < C; ++c) s.pooled_logits[c] += s.det_probs(i, c) * s.cls_logits(i, c);
  s.image_probs.resize(C);
  std::transform(s.pooled_logits.begin(), s.pooled_logits.end(), s.image_probs.begin(), sigmoid);

  if (!all_finite(s.cls_logits.data) || !all_finite(s.det_logits.data) || !all_finite(s.det_probs.data) ||
      !all_finite(s.pooled_logits))
    throw NonFiniteScore("non-finite MIL score for image " + proposals.image_id);
  return s;
}

double mid_loss(const ScoreBundle& scores, std::span<const double> targets) {
  if (targets.size() != scores.image_probs.size()) throw ShapeMismatch("mid_loss: target length mismatch");
  double loss = 0.0;
  for (std::size_t c = 0; c < targets.size(); ++c) {
    const double p = std::clamp(scores.image_probs[c], kProbEpsilon, 1.0 - kProbEpsilon);
    loss -= targets[c] * std::log(p) + (1.0 - targets[c]) * std::log(1.0 - p);
  }
  return loss;
}

double mid_loss(const ScoreBundle& scores, const LabelSet& labels) {
  return mid_loss(scores, multi_hot(labels, scores.image_probs.size()));
}

void mid_loss_backward(const ScoreBundle& s, std::span<const double> targets, Matrix& d_cls_logits,
                       Matrix& d_det_logits) {
  const std::size_t m = s.num_proposals(), C = s.num_classes();
  if (targets.size() != C) throw ShapeMismatch("mid_loss_backward: target length mismatch");
  d_cls_logits = Matrix(m, C);
  d_det_logits = Matrix(m, C);
  for (std::size_t c = 0; c < C; ++c) {
    const double p = s.image_probs[c];
    if (p <= kProbEpsilon || p >= 1.0 - kProbEpsilon) continue;
    // d/dz of the BCE through the sigmoid.
    const double g = p - targets[c];
    const double z = s.pooled_logits[c];
    for (std::size_t i = 0; i < m; ++i) {
      d_cls_logits(i, c) = g * s.det_probs(i, c);
      d_det_logits(i, c) = g * s.det_probs(i, c) * (s.cls_logits(i, c) - z);
    }
  }
}

Matrix initial_detection_scores(const ScoreBundle& s) {
  const std::size_t m = s.num_proposals(), C = s.num_classes();
  Matrix out(m, C + 1);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < C; ++c) out(i, c) = s.cls_probs(i, c) * s.det_probs(i, c);
  return out;
}

}  // namespace wsod
