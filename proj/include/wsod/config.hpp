#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wsod/oicr.hpp"

namespace wsod {

struct TrainConfig {
  double lr = 0.01;
  std::size_t batch_size = 2;
  std::size_t refinements = 3;  // refinement heads
  double nms_iou = 0.4;
  double oicr_iou = 0.5;
  std::vector<int> scales{400, 600, 800, 1200};
  int base_scale = 600;  // scale at which stored proposal features were extracted
  std::size_t max_proposals = 500;
  std::uint64_t seed = 0;
  std::size_t steps = 2000;
  std::size_t eval_interval = 0;        // 0 disables validation
  std::size_t checkpoint_interval = 0;  // 0 keeps only the final checkpoint
  bool flip = true;
  double score_floor = 0.05;
  ScoreAggregation aggregation = ScoreAggregation::mean_of_heads;

  // Throws ConfigError naming the offending field.
  void validate() const;
  // Every field as key -> text, in the config file syntax.
  std::map<std::string, std::string> to_map() const;
  // Throws ConfigError on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
};

// Flat "key = value" lines; '#' starts a comment.
void apply_config_file(TrainConfig& config, const std::filesystem::path& path);
// For every key, WSOD_<KEY> (uppercase) overrides the current value when set.
void apply_env_overrides(TrainConfig& config, const char* prefix = "WSOD_");
void write_config_file(const TrainConfig& config, const std::filesystem::path& path);

}  // namespace wsod
