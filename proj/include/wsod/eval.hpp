#pragma once

// Detection post-processing and metrics: NMS, multi-scale averaging,
// PASCAL-style AP, a COCO-style threshold sweep, and CorLoc.

#include <optional>
#include <string>
#include <vector>

#include "wsod/box.hpp"
#include "wsod/tensor.hpp"

namespace wsod {

struct Detection {
  std::string image_id;
  Box box;
  int cls = 0;
  double score = 0.0;
};

struct GroundTruthBox {
  std::string image_id;
  Box box;
  int cls = 0;
};

// Greedy NMS over one group (one image, one class). Detections are visited by
// descending score, ties by input order; output is in visit order.
std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold = 0.4);

// NMS applied independently to every (image, class) group. Output order:
// groups in order of first appearance, each group in NMS order.
std::vector<Detection> nms_per_group(const std::vector<Detection>& dets, double iou_threshold = 0.4);

// Elementwise mean. Throws ShapeMismatch on empty input or differing shapes.
Matrix average_multiscale(const std::vector<Matrix>& score_sets);

enum class ApInterpolation { all_point, eleven_point };

struct ApOptions {
  double iou_threshold = 0.5;
  ApInterpolation interpolation = ApInterpolation::all_point;
  // When set, ground truth outside [min_area, max_area) is ignored and unmatched
  // detections outside that range are not counted.
  std::optional<std::pair<double, double>> area_range;
  // Keep at most this many detections per image (by score); 0 keeps all.
  std::size_t max_dets_per_image = 0;
};

struct PrCurve {
  std::vector<double> recall;     // after each counted detection, by descending score
  std::vector<double> precision;
};

// nullopt when the class has no (non-ignored) ground truth.
std::optional<PrCurve> precision_recall_curve(const std::vector<Detection>& dets,
                                              const std::vector<GroundTruthBox>& gts, int cls,
                                              const ApOptions& options = {});

// AP for one class. A detection matches the ground truth of the same image
// with the largest IoU if that IoU >= threshold and that box is still
// unmatched; otherwise it is a false positive. nullopt when the class has no
// ground truth.
std::optional<double> average_precision(const std::vector<Detection>& dets,
                                        const std::vector<GroundTruthBox>& gts, int cls,
                                        const ApOptions& options = {});

struct MeanAp {
  std::vector<std::optional<double>> per_class;
  std::optional<double> mean;  // over classes with ground truth
};

MeanAp mean_average_precision(const std::vector<Detection>& dets, const std::vector<GroundTruthBox>& gts,
                              std::size_t num_classes, const ApOptions& options = {});

// Fraction of images containing `cls` whose top-scoring detection of that class
// has IoU >= 0.5 with a ground-truth box of the class. nullopt if no image has it.
std::optional<double> corloc(const std::vector<Detection>& dets, const std::vector<GroundTruthBox>& gts,
                             int cls, double iou_threshold = 0.5);

struct CocoSummary {
  std::optional<double> ap;  // mean over IoU 0.50:0.05:0.95
  std::optional<double> ap50;
  std::optional<double> ap75;
  std::optional<double> ap_small;   // area < 32^2
  std::optional<double> ap_medium;  // 32^2 <= area < 96^2
  std::optional<double> ap_large;   // area >= 96^2
};

// Every entry is a mean over classes with ground truth of average_precision at
// the respective setting; at most 100 detections per image.
CocoSummary coco_ap_sweep(const std::vector<Detection>& dets, const std::vector<GroundTruthBox>& gts,
                          std::size_t num_classes);

// IoU thresholds 0.50, 0.55, ..., 0.95 computed as exact decimal ratios.
std::vector<double> coco_iou_thresholds();

}  // namespace wsod
