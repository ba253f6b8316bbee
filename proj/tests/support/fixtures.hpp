#pragma once

#include <filesystem>
#include <string>

#include "wsod/config.hpp"
#include "wsod/features.hpp"
#include "wsod/synthetic.hpp"

namespace wsod::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "wsod");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// A small synthetic corpus that trains in well under a second.
SyntheticOptions tiny_synthetic_options(std::uint64_t seed = 3);
ToyFeatureProvider tiny_provider();

// Few steps, a single scale, no flips.
TrainConfig tiny_train_config(std::size_t refinements = 2, std::size_t steps = 40);

void write_text(const std::filesystem::path& path, const std::string& contents);
std::string read_text(const std::filesystem::path& path);

}  // namespace wsod::testing
