#pragma once

// Caption-to-label inference: tokenization, exact and synonym matching over
// a category vocabulary, embedding nearest-neighbour labels, and the
// exact-match-then-classifier rule.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wsod {

struct TokenizedCaption {
  std::vector<std::string> tokens;
  std::string source;
};

// Lowercase, delete ASCII punctuation, split on whitespace.
TokenizedCaption tokenize(std::string_view caption);

enum class Provenance { exact, synonym, embedding, classifier, gold };

std::string_view to_string(Provenance p);

struct LabelSet {
  std::set<int> present;
  Provenance provenance = Provenance::exact;

  bool empty() const { return present.empty(); }
  bool contains(int c) const { return present.count(c) != 0; }
};

std::vector<double> multi_hot(const LabelSet& labels, std::size_t num_classes);

class CategoryVocabulary {
 public:
  CategoryVocabulary() = default;
  // Class names are normalized through tokenize(); each maps to itself.
  explicit CategoryVocabulary(const std::vector<std::string>& class_names);

  // Maps a (possibly multi-word) phrase to a class. Throws if the class is unknown.
  void add_synonym(std::string_view phrase, std::string_view class_name);
  // Reads "word<TAB>class_name" lines; blank lines and '#' comments are skipped.
  void load_synonyms(const std::filesystem::path& path);

  std::size_t size() const { return classes_.size(); }
  const std::vector<std::string>& classes() const { return classes_; }
  const std::string& name(int c) const { return classes_.at(static_cast<std::size_t>(c)); }
  std::optional<int> index_of(std::string_view class_name) const;
  const std::unordered_map<std::string, int>& synonyms() const { return synonyms_; }
  std::size_t max_phrase_tokens() const { return max_phrase_tokens_; }

  // FNV-1a over the ordered class names; used to tie checkpoints to a vocabulary.
  std::uint64_t hash() const;

 private:
  std::vector<std::string> classes_;
  std::unordered_map<std::string, int> synonyms_;
  std::size_t max_phrase_tokens_ = 1;
};

CategoryVocabulary load_class_list(const std::filesystem::path& path);

// Word vectors; unknown words are reported as std::nullopt.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  // One word per line followed by `dim` reals. When `keep` is set only words
  // it accepts are stored.
  static EmbeddingTable load(const std::filesystem::path& path,
                             const std::function<bool(std::string_view)>& keep = {});
  void save(const std::filesystem::path& path) const;

  void insert(std::string word, std::vector<double> vec);
  std::optional<std::span<const double>> find(std::string_view word) const;
  // Mean of token vectors for a multi-word phrase; nullopt if any token is missing.
  std::optional<std::vector<double>> phrase(std::string_view phrase) const;

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  const std::unordered_map<std::string, std::vector<double>>& vectors() const { return vectors_; }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

// Class i is present iff its name occurs as a contiguous token n-gram.
LabelSet exact_match(const TokenizedCaption& caption, const CategoryVocabulary& vocab);

// Class i is present iff any n-gram is a synonym key for i. Superset of exact_match.
LabelSet synonym_match(const TokenizedCaption& caption, const CategoryVocabulary& vocab);

// The single class whose embedding is closest (cosine distance) to any caption
// token; empty when no token embeds. Ties go to the lower class index.
LabelSet embedding_pseudo_label(const TokenizedCaption& caption, const EmbeddingTable& table,
                                const CategoryVocabulary& vocab);

struct TextClassifierParams;

// Exact match when it finds anything, otherwise the text classifier's labels.
LabelSet two_step_infer(const TokenizedCaption& caption, const CategoryVocabulary& vocab,
                        const TextClassifierParams& classifier, const EmbeddingTable& table);

}  // namespace wsod
