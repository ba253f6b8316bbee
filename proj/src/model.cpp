#include "wsod/model.hpp"

#include <random>

#include "wsod/error.hpp"
#include "wsod/kernels.hpp"

namespace wsod {

void DetectorParams::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  mil.cls.init_uniform(rng);
  mil.det.init_uniform(rng);
  for (auto& h : refine.heads) h.init_uniform(rng);
}

DetectorParams DetectorParams::zeros_like() const {
  DetectorParams g = *this;
  g.for_each_array([](std::span<double> a) { std::fill(a.begin(), a.end(), 0.0); });
  return g;
}

void DetectorParams::for_each_array(const std::function<void(std::span<double>)>& fn) {
  fn(mil.cls.weight.data);
  fn(mil.cls.bias);
  fn(mil.det.weight.data);
  fn(mil.det.bias);
  for (auto& h : refine.heads) {
    fn(h.weight.data);
    fn(h.bias);
  }
}

void DetectorParams::for_each_array(const std::function<void(std::span<const double>)>& fn) const {
  const_cast<DetectorParams*>(this)->for_each_array([&](std::span<double> a) { fn(a); });
}

std::size_t DetectorParams::parameter_count() const {
  std::size_t n = 0;
  for_each_array([&](std::span<const double> a) { n += a.size(); });
  return n;
}

namespace {

std::vector<Matrix> targets_from(const ProposalSet& p, const LabelSet& labels, const ScoreBundle& mil,
                                 const std::vector<Matrix>& head_scores, double threshold) {
  std::vector<Matrix> out;
  out.reserve(head_scores.size());
  // Head k is supervised by the scores of head k-1; head 0 by cls_probs * det_probs.
  Matrix prev = initial_detection_scores(mil);
  for (const auto& s : head_scores) {
    out.push_back(generate_instance_targets(p.boxes, prev, labels, threshold));
    prev = s;
  }
  return out;
}

}  // namespace

std::vector<Matrix> refinement_targets(const ProposalSet& proposals, const LabelSet& labels,
                                       const DetectorParams& params) {
  const auto mil = mil_forward(proposals, params.mil);
  std::vector<Matrix> scores;
  for (const auto& h : params.refine.heads) scores.push_back(refine_scores(proposals, h));
  return targets_from(proposals, labels, mil, scores, params.refine.iou_threshold);
}

LossBreakdown detector_objective(const ProposalSet& proposals, const LabelSet& labels,
                                 const DetectorParams& params, DetectorParams* grad,
                                 const std::vector<Matrix>* targets) {
  const auto y = multi_hot(labels, params.num_classes());
  const auto mil = mil_forward(proposals, params.mil);
  std::vector<Matrix> scores;
  for (const auto& h : params.refine.heads) scores.push_back(refine_scores(proposals, h));
  const auto own_targets =
      targets ? std::vector<Matrix>{} : targets_from(proposals, labels, mil, scores, params.refine.iou_threshold);
  const auto& t = targets ? *targets : own_targets;
  if (t.size() != scores.size()) throw ShapeMismatch("detector_objective: one target matrix per head expected");

  LossBreakdown out;
  out.mid = mid_loss(mil, y);
  for (std::size_t k = 0; k < scores.size(); ++k) out.refinement.push_back(oicr_loss(scores[k], t[k]));
  out.total = total_loss(out.mid, out.refinement);

  if (grad) {
    Matrix d_cls, d_det;
    mid_loss_backward(mil, y, d_cls, d_det);
    kernels::omp::affine_backward(proposals.features, params.mil.cls, d_cls, grad->mil.cls, nullptr);
    kernels::omp::affine_backward(proposals.features, params.mil.det, d_det, grad->mil.det, nullptr);
    for (std::size_t k = 0; k < scores.size(); ++k) {
      const auto d = oicr_loss_backward(scores[k], t[k]);
      kernels::omp::affine_backward(proposals.features, params.refine.heads[k], d, grad->refine.heads[k], nullptr);
    }
  }
  return out;
}

}  // namespace wsod
