#pragma once

// Synthetic weak-supervision dataset: coloured elliptical blobs on a noisy canvas,
// templated captions (a fraction paraphrased so that no class name appears),
// grid proposals with toy features, a partial synonym list and a word-vector file.

#include <cstdint>
#include <filesystem>

#include "wsod/features.hpp"

namespace wsod {

struct SyntheticOptions {
  std::size_t num_images = 200;
  std::size_t test_images = 50;  // the last images form test.jsonl
  std::size_t num_classes = 4;   // at most 8
  int image_size = 96;
  int grid = 5;
  std::size_t max_objects = 3;
  std::size_t captions_per_image = 2;
  double paraphrase_rate = 0.3;   // captions whose mentions avoid every class name
  double labeled_fraction = 0.5;  // training images copied into textclf.jsonl
  std::size_t embedding_dim = 300;
  std::uint64_t seed = 1;
};

struct SyntheticSummary {
  std::size_t train_images = 0;
  std::size_t test_images = 0;
  std::size_t captions = 0;
  std::size_t paraphrased_captions = 0;
};

// Writes classes.txt, synonyms.tsv, embeddings.txt, images/, proposals/,
// train.jsonl, test.jsonl and textclf.jsonl under `out_dir`.
SyntheticSummary make_synthetic(const std::filesystem::path& out_dir, const SyntheticOptions& options,
                                const ToyFeatureProvider& provider);

}  // namespace wsod
