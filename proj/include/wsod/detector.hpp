#pragma once

// Training and inference drivers for the detector.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "wsod/config.hpp"
#include "wsod/eval.hpp"
#include "wsod/features.hpp"
#include "wsod/labels.hpp"
#include "wsod/manifest.hpp"
#include "wsod/model.hpp"

namespace wsod {

struct DetectorCheckpoint {
  DetectorParams params;
  DetectorParams accumulators;  // Adagrad state
  std::size_t step = 0;         // completed optimizer steps
  TrainConfig config;
  std::vector<std::string> classes;
  std::size_t provider_channels = 12;
  std::uint64_t provider_seed = 7;
};

void save_checkpoint(const std::filesystem::path& path, const DetectorCheckpoint& checkpoint);
DetectorCheckpoint load_checkpoint(const std::filesystem::path& path);

// Proposal sets per (image, scale, flip), extracted on demand and cached.
// Records without an image use the stored features at every scale.
class FeatureCache {
 public:
  FeatureCache(const DatasetManifest& manifest, const ToyFeatureProvider& provider, int base_scale,
               std::size_t max_proposals);
  ~FeatureCache();
  FeatureCache(const FeatureCache&) = delete;
  FeatureCache& operator=(const FeatureCache&) = delete;

  const ProposalSet& get(std::size_t record, int scale, bool flip);
  const DatasetManifest& manifest() const { return manifest_; }

 private:
  struct Impl;
  const DatasetManifest& manifest_;
  std::unique_ptr<Impl> impl_;
};

struct TrainOptions {
  std::optional<std::filesystem::path> output_dir;  // periodic and best checkpoints
  const DatasetManifest* validation = nullptr;      // enables best-mAP retention
  std::ostream* log = nullptr;
  std::size_t log_every = 100;
};

struct TrainResult {
  DetectorCheckpoint final;
  std::optional<DetectorCheckpoint> best;  // best validation mAP@0.5
  std::optional<double> best_map;
  std::vector<LossBreakdown> history;      // one entry per step run in this call
  std::map<std::string, std::size_t> gradient_contributions;  // per image id
  std::vector<std::string> skipped_images; // empty label sets
};

// Minimizes the detector objective with Adagrad. Continues from `resume` when given.
// Throws NonFiniteScore with the step and image when the loss diverges.
TrainResult train_detector(const DatasetManifest& manifest, const ImageLabels& labels, const TrainConfig& config,
                           const CategoryVocabulary& vocab, const ToyFeatureProvider& provider,
                           const DetectorCheckpoint* resume = nullptr, const TrainOptions& options = {});

// Multi-scale forward, averaged scores, per-class NMS, score floor.
std::vector<Detection> detect(const DatasetManifest& manifest, const DetectorParams& params,
                              const TrainConfig& config, const ToyFeatureProvider& provider);

// Fixed-format TSV: image_id, class name, score (%.6f), x1, y1, x2, y2 (%.2f).
void write_detections(const std::filesystem::path& path, const std::vector<Detection>& dets,
                      const CategoryVocabulary& vocab);
std::vector<Detection> read_detections(const std::filesystem::path& path, const CategoryVocabulary& vocab);
std::string format_detection(const Detection& d, const CategoryVocabulary& vocab);

}  // namespace wsod
