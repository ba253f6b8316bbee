#pragma once

// Text-only label classifier: frozen word embeddings, a ReLU projection,
// max-pooling over tokens and a per-class linear output.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "wsod/caption.hpp"
#include "wsod/tensor.hpp"

namespace wsod {

struct TextClassifierParams {
  AffineLayer projection;  // embedding dim -> hidden
  AffineLayer output;      // hidden -> classes
  double threshold = 0.5;
  // Present only when trained with unfrozen embeddings; shadows the table.
  std::unordered_map<std::string, std::vector<double>> tuned_embeddings;

  std::size_t embedding_dim() const { return projection.in_dim(); }
  std::size_t hidden_dim() const { return projection.out_dim(); }
  std::size_t num_classes() const { return output.out_dim(); }

  friend bool operator==(const TextClassifierParams&, const TextClassifierParams&) = default;
};

TextClassifierParams make_text_classifier(std::size_t embedding_dim, std::size_t hidden_dim,
                                          std::size_t num_classes, std::uint64_t seed);

// Per-class logits. Throws EmptyInput when no token has an embedding.
std::vector<double> classifier_forward(const TokenizedCaption& caption, const EmbeddingTable& table,
                                       const TextClassifierParams& params);

// Classes with sigmoid(logit) >= threshold, or the argmax class when none passes.
LabelSet classifier_predict(const TokenizedCaption& caption, const EmbeddingTable& table,
                            const TextClassifierParams& params);

struct LabeledCaptionExample {
  TokenizedCaption caption;
  LabelSet gold;
};

// Mean over classes of sigmoid cross-entropy for one example, with gradients
// accumulated into `grad` (same shapes as params). Embedding gradients are
// accumulated into `embedding_grad` when non-null. Throws EmptyInput.
double text_example_loss(const LabeledCaptionExample& example, const EmbeddingTable& table,
                         const TextClassifierParams& params, TextClassifierParams* grad,
                         std::unordered_map<std::string, std::vector<double>>* embedding_grad = nullptr);

struct TextTrainConfig {
  std::size_t hidden_dim = 400;
  double lr = 0.01;
  std::size_t batch_size = 16;
  std::size_t steps = 1000;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  bool train_embeddings = false;
};

struct TextTrainResult {
  TextClassifierParams params;
  std::vector<double> loss_history;  // mean batch loss per step
  std::size_t skipped_examples = 0;  // examples whose tokens are all out of vocabulary
};

TextTrainResult train_text_classifier(const std::vector<LabeledCaptionExample>& data,
                                      const EmbeddingTable& table, std::size_t num_classes,
                                      const TextTrainConfig& config);

// Mean loss over the examples that embed; nullopt when none do.
std::optional<double> text_dataset_loss(const std::vector<LabeledCaptionExample>& data,
                                        const EmbeddingTable& table,
                                        const TextClassifierParams& params);

struct ClassPR {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::optional<double> precision;
  std::optional<double> recall;
};

struct LabelPR {
  std::optional<double> precision;  // undefined when nothing was predicted
  std::optional<double> recall;     // undefined when the gold sets are all empty
  std::vector<ClassPR> per_class;
};

// Micro-averaged over (image, class) pairs. Throws ShapeMismatch on length mismatch.
LabelPR eval_label_pr(const std::vector<LabelSet>& predicted, const std::vector<LabelSet>& gold,
                      std::size_t num_classes);

void save_text_classifier(const std::filesystem::path& path, const TextClassifierParams& params,
                          const CategoryVocabulary& vocab);
// Throws ConfigError when the checkpoint was written for another vocabulary.
TextClassifierParams load_text_classifier(const std::filesystem::path& path,
                                          const CategoryVocabulary& vocab);

}  // namespace wsod
