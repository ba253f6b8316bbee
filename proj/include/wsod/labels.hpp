#pragma once

// Image-level label construction from captions under the different strategies.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wsod/caption.hpp"
#include "wsod/manifest.hpp"
#include "wsod/textclf.hpp"

namespace wsod {

// exact:     exact class-name match
// synonym:   exact match, falling back to the synonym vocabulary when it is empty
// embedding: exact match, falling back to the nearest class in embedding space
// two_step:  exact match, falling back to the text classifier
// gold:      the manifest's gold labels
enum class LabelStrategy { exact, synonym, embedding, two_step, gold };

// Accepts exact|synonym|embedding|two-step|gold ("two_step" is an alias).
std::optional<LabelStrategy> parse_label_strategy(std::string_view name);
std::string_view to_string(LabelStrategy s);

struct LabelResources {
  const CategoryVocabulary* vocab = nullptr;
  const EmbeddingTable* embeddings = nullptr;       // embedding, two_step
  const TextClassifierParams* classifier = nullptr; // two_step
};

// Labels of a single caption. Throws ConfigError if a needed resource is missing.
LabelSet infer_caption_labels(const TokenizedCaption& caption, LabelStrategy strategy,
                              const LabelResources& resources);

struct ImageLabels {
  std::map<std::string, LabelSet> labels;  // every image of the manifest
  std::vector<std::string> empty_images;   // images whose label set is empty, in manifest order
};

// Union over each image's captions (or its gold labels for `gold`).
ImageLabels build_image_labels(const DatasetManifest& manifest, LabelStrategy strategy,
                               const LabelResources& resources);

// One example per caption, labelled with its image's gold labels; with
// `concatenate`, one example per image made of all its captions joined.
// Images without gold labels or boxes are skipped.
std::vector<LabeledCaptionExample> caption_examples(const DatasetManifest& manifest, const CategoryVocabulary& vocab,
                                                    bool concatenate = false);

// Line-delimited JSON {"image_id", "labels": [class names], "provenance"}.
void save_image_labels(const std::filesystem::path& path, const ImageLabels& labels,
                       const CategoryVocabulary& vocab);
ImageLabels load_image_labels(const std::filesystem::path& path, const CategoryVocabulary& vocab);

}  // namespace wsod
