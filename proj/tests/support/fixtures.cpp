#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace wsod::testing {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto candidate = std::filesystem::temp_directory_path() /
                     (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
                      std::to_string(rd() % 100000));
    if (std::filesystem::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("TempDir: could not create a directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

SyntheticOptions tiny_synthetic_options(std::uint64_t seed) {
  SyntheticOptions o;
  o.num_images = 24;
  o.test_images = 8;
  o.image_size = 48;
  o.grid = 4;
  o.embedding_dim = 16;
  o.seed = seed;
  return o;
}

ToyFeatureProvider tiny_provider() { return ToyFeatureProvider(6, 7); }

TrainConfig tiny_train_config(std::size_t refinements, std::size_t steps) {
  TrainConfig c;
  c.refinements = refinements;
  c.steps = steps;
  c.scales = {600};
  c.flip = false;
  c.seed = 5;
  return c;
}

void write_text(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  out << contents;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace wsod::testing
