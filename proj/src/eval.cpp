#include "wsod/eval.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "wsod/error.hpp"

namespace wsod {

namespace {

std::vector<std::size_t> order_by_score(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

double interpolated_ap(const std::vector<double>& recall, const std::vector<double>& precision,
                       ApInterpolation mode) {
  if (mode == ApInterpolation::eleven_point) {
    double ap = 0.0;
    for (int t = 0; t <= 10; ++t) {
      const double r = t / 10.0;
      double p = 0.0;
      for (std::size_t k = 0; k < recall.size(); ++k)
        if (recall[k] >= r) p = std::max(p, precision[k]);
      ap += p / 11.0;
    }
    return ap;
  }
  std::vector<double> mrec{0.0}, mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t k = mpre.size() - 1; k > 0; --k) mpre[k - 1] = std::max(mpre[k - 1], mpre[k]);
  double ap = 0.0;
  for (std::size_t k = 1; k < mrec.size(); ++k)
    if (mrec[k] != mrec[k - 1]) ap += (mrec[k] - mrec[k - 1]) * mpre[k];
  return ap;
}

bool in_range(double area, const std::optional<std::pair<double, double>>& range) {
  return !range || (area >= range->first && area < range->second);
}

}  // namespace

std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold) {
  const auto order = order_by_score(dets);
  std::vector<Detection> kept;
  for (const auto idx : order) {
    const auto& d = dets[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(),
                                        [&](const Detection& k) { return iou(k.box, d.box) > iou_threshold; });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> nms_per_group(const std::vector<Detection>& dets, double iou_threshold) {
  std::vector<std::pair<std::string, int>> keys;
  std::map<std::pair<std::string, int>, std::vector<Detection>> groups;
  for (const auto& d : dets) {
    auto key = std::make_pair(d.image_id, d.cls);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) keys.push_back(key);
    it->second.push_back(d);
  }
  std::vector<Detection> out;
  for (const auto& key : keys) {
    auto kept = nms(groups[key], iou_threshold);
    out.insert(out.end(), kept.begin(), kept.end());
  }
  return out;
}

Matrix average_multiscale(const std::vector<Matrix>& score_sets) {
  if (score_sets.empty()) throw ShapeMismatch("average_multiscale: no score sets");
  Matrix out(score_sets[0].rows, score_sets[0].cols);
  for (const auto& s : score_sets) {
    if (!s.same_shape(out)) throw ShapeMismatch("average_multiscale: score sets differ in shape");
    for (std::size_t k = 0; k < s.data.size(); ++k) out.data[k] += s.data[k];
  }
  const double n = static_cast<double>(score_sets.size());
  for (double& v : out.data) v /= n;
  return out;
}

std::optional<PrCurve> precision_recall_curve(const std::vector<Detection>& all_dets,
                                              const std::vector<GroundTruthBox>& all_gts, int cls,
                                              const ApOptions& opt) {
  // Ground truth of this class grouped by image; `ignored` marks out-of-range boxes.
  struct Gt {
    Box box;
    bool ignored;
    bool matched = false;
  };
  std::map<std::string, std::vector<Gt>> gts;
  std::size_t positives = 0;
  for (const auto& g : all_gts) {
    if (g.cls != cls) continue;
    const bool ignored = !in_range(g.box.area(), opt.area_range);
    gts[g.image_id].push_back({g.box, ignored});
    if (!ignored) ++positives;
  }
  if (positives == 0) return std::nullopt;

  std::vector<Detection> dets;
  for (const auto& d : all_dets)
    if (d.cls == cls) dets.push_back(d);
  if (opt.max_dets_per_image > 0) {
    std::map<std::string, std::size_t> seen;
    std::vector<Detection> capped;
    for (const auto idx : order_by_score(dets))
      if (seen[dets[idx].image_id]++ < opt.max_dets_per_image) capped.push_back(dets[idx]);
    dets = std::move(capped);
  }

  PrCurve curve;
  std::size_t tp = 0, fp = 0;
  for (const auto idx : order_by_score(dets)) {
    const auto& d = dets[idx];
    auto it = gts.find(d.image_id);
    double best = -1.0;
    Gt* best_gt = nullptr;
    if (it != gts.end()) {
      for (auto& g : it->second) {
        const double o = iou(d.box, g.box);
        if (o > best) {
          best = o;
          best_gt = &g;
        }
      }
    }
    if (best_gt && best >= opt.iou_threshold) {
      if (best_gt->ignored) continue;
      if (!best_gt->matched) {
        best_gt->matched = true;
        ++tp;
      } else {
        ++fp;
      }
    } else {
      if (!in_range(d.box.area(), opt.area_range)) continue;
      ++fp;
    }
    curve.recall.push_back(static_cast<double>(tp) / static_cast<double>(positives));
    curve.precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  return curve;
}

std::optional<double> average_precision(const std::vector<Detection>& dets, const std::vector<GroundTruthBox>& gts,
                                        int cls, const ApOptions& opt) {
  const auto curve = precision_recall_curve(dets, gts, cls, opt);
  if (!curve) return std::nullopt;
  return interpolated_ap(curve->recall, curve->precision, opt.interpolation);
}

MeanAp mean_average_precision(const std::vector<Detection>& dets, const std::vector<GroundTruthBox>& gts,
                              std::size_t num_classes, const ApOptions& options) {
  MeanAp out;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto ap = average_precision(dets, gts, static_cast<int>(c), options);
    if (ap) {
      sum += *ap;
      ++n;
    }
    out.per_class.push_back(ap);
  }
  if (n) out.mean = sum / static_cast<double>(n);
  return out;
}

std::optional<double> corloc(const std::vector<Detection>& dets, const std::vector<GroundTruthBox>& gts,
                             int cls, double iou_threshold) {
  std::map<std::string, std::vector<Box>> positives;
  for (const auto& g : gts)
    if (g.cls == cls) positives[g.image_id].push_back(g.box);
  if (positives.empty()) return std::nullopt;

  std::map<std::string, const Detection*> top;
  for (const auto& d : dets) {
    if (d.cls != cls) continue;
    auto& t = top[d.image_id];
    if (!t || d.score > t->score) t = &d;
  }
  std::size_t hits = 0;
  for (const auto& [image, boxes] : positives) {
    const auto it = top.find(image);
    if (it == top.end()) continue;
    const bool hit = std::any_of(boxes.begin(), boxes.end(),
                                 [&](const Box& b) { return iou(it->second->box, b) >= iou_threshold; });
    if (hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(positives.size());
}

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int k = 0; k < 10; ++k) t.push_back(static_cast<double>(50 + 5 * k) / 100.0);
  return t;
}

CocoSummary coco_ap_sweep(const std::vector<Detection>& dets, const std::vector<GroundTruthBox>& gts,
                          std::size_t num_classes) {
  ApOptions base;
  base.max_dets_per_image = 100;
  auto at = [&](double thr, std::optional<std::pair<double, double>> range = std::nullopt) {
    ApOptions o = base;
    o.iou_threshold = thr;
    o.area_range = range;
    return mean_average_precision(dets, gts, num_classes, o).mean;
  };
  CocoSummary s;
  double sum = 0.0;
  bool defined = true;
  for (const double thr : coco_iou_thresholds()) {
    const auto v = at(thr);
    if (!v) defined = false;
    else sum += *v;
  }
  if (defined) s.ap = sum / 10.0;
  s.ap50 = at(0.5);
  s.ap75 = at(0.75);
  // Size buckets use the full sweep as well.
  auto bucket = [&](double lo, double hi) -> std::optional<double> {
    double acc = 0.0;
    for (const double thr : coco_iou_thresholds()) {
      const auto v = at(thr, std::make_pair(lo, hi));
      if (!v) return std::nullopt;
      acc += *v;
    }
    return acc / 10.0;
  };
  s.ap_small = bucket(0.0, 32.0 * 32.0);
  s.ap_medium = bucket(32.0 * 32.0, 96.0 * 96.0);
  s.ap_large = bucket(96.0 * 96.0, 1e300);
  return s;
}

}  // namespace wsod
