#include "wsod/caption.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "wsod/error.hpp"
#include "wsod/textclf.hpp"

namespace wsod {

TokenizedCaption tokenize(std::string_view caption) {
  TokenizedCaption out;
  out.source = std::string(caption);
  std::string current;
  for (const char ch : caption) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      if (!current.empty()) out.tokens.push_back(std::move(current));
      current.clear();
    } else if (u < 128 && std::ispunct(u)) {
      continue;
    } else {
      current.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  if (!current.empty()) out.tokens.push_back(std::move(current));
  return out;
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::exact: return "exact";
    case Provenance::synonym: return "synonym";
    case Provenance::embedding: return "embedding";
    case Provenance::classifier: return "classifier";
    case Provenance::gold: return "gold";
  }
  return "unknown";
}

std::vector<double> multi_hot(const LabelSet& labels, std::size_t num_classes) {
  std::vector<double> y(num_classes, 0.0);
  for (const int c : labels.present) {
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes)
      throw ShapeMismatch("label index " + std::to_string(c) + " out of range");
    y[static_cast<std::size_t>(c)] = 1.0;
  }
  return y;
}

namespace {

std::string normalize_phrase(std::string_view phrase) {
  const auto tok = tokenize(phrase);
  std::string joined;
  for (const auto& t : tok.tokens) {
    if (!joined.empty()) joined.push_back(' ');
    joined += t;
  }
  return joined;
}

std::size_t token_count(const std::string& phrase) {
  if (phrase.empty()) return 0;
  return 1 + static_cast<std::size_t>(std::count(phrase.begin(), phrase.end(), ' '));
}

// Calls fn(ngram) for every contiguous n-gram with 1 <= n <= max_n.
template <class Fn>
void for_each_ngram(const std::vector<std::string>& tokens, std::size_t max_n, Fn&& fn) {
  for (std::size_t start = 0; start < tokens.size(); ++start) {
    std::string gram;
    for (std::size_t n = 1; n <= max_n && start + n <= tokens.size(); ++n) {
      if (n > 1) gram.push_back(' ');
      gram += tokens[start + n - 1];
      fn(gram);
    }
  }
}

}  // namespace

CategoryVocabulary::CategoryVocabulary(const std::vector<std::string>& class_names) {
  for (const auto& raw : class_names) {
    auto name = normalize_phrase(raw);
    if (name.empty()) throw ConfigError("empty class name");
    if (synonyms_.count(name)) throw ConfigError("duplicate class name: " + name);
    const int idx = static_cast<int>(classes_.size());
    synonyms_[name] = idx;
    max_phrase_tokens_ = std::max(max_phrase_tokens_, token_count(name));
    classes_.push_back(std::move(name));
  }
}

std::optional<int> CategoryVocabulary::index_of(std::string_view class_name) const {
  const auto name = normalize_phrase(class_name);
  for (std::size_t i = 0; i < classes_.size(); ++i)
    if (classes_[i] == name) return static_cast<int>(i);
  return std::nullopt;
}

void CategoryVocabulary::add_synonym(std::string_view phrase, std::string_view class_name) {
  const auto idx = index_of(class_name);
  if (!idx) throw ConfigError("synonym target is not a class: " + std::string(class_name));
  auto key = normalize_phrase(phrase);
  if (key.empty()) return;
  const auto it = synonyms_.find(key);
  // A class name always maps to itself.
  if (it != synonyms_.end() && index_of(key)) return;
  max_phrase_tokens_ = std::max(max_phrase_tokens_, token_count(key));
  synonyms_[std::move(key)] = *idx;
}

void CategoryVocabulary::load_synonyms(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synonym file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected word<TAB>class_name", lineno);
    try {
      add_synonym(std::string_view(line).substr(0, tab), std::string_view(line).substr(tab + 1));
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
}

std::uint64_t CategoryVocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& name : classes_) {
    for (const char ch : name) {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ULL;
    }
    h ^= 0xffu;
    h *= 1099511628211ULL;
  }
  return h;
}

CategoryVocabulary load_class_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open class list " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    names.push_back(line);
  }
  return CategoryVocabulary(names);
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path,
                                    const std::function<bool(std::string_view)>& keep) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open embedding file " + path.string());
  EmbeddingTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (keep && !keep(word)) continue;
    std::vector<double> vec;
    vec.reserve(table.dim_ ? table.dim_ : 300);
    double v;
    while (ss >> v) vec.push_back(v);
    if (!ss.eof()) throw ParseError("non-numeric embedding component for '" + word + "'", lineno);
    if (vec.empty()) throw ParseError("embedding line has no components", lineno);
    if (table.dim_ == 0) table.dim_ = vec.size();
    if (vec.size() != table.dim_)
      throw ParseError("embedding for '" + word + "' has " + std::to_string(vec.size()) +
                           " components, expected " + std::to_string(table.dim_),
                       lineno);
    table.vectors_.emplace(std::move(word), std::move(vec));
  }
  return table;
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  std::vector<const std::string*> words;
  for (const auto& [w, _] : vectors_) words.push_back(&w);
  std::sort(words.begin(), words.end(), [](auto* a, auto* b) { return *a < *b; });
  char buf[32];
  for (const auto* w : words) {
    out << *w;
    for (const double v : vectors_.at(*w)) {
      std::snprintf(buf, sizeof buf, " %.6f", v);
      out << buf;
    }
    out << '\n';
  }
}

void EmbeddingTable::insert(std::string word, std::vector<double> vec) {
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_) throw ShapeMismatch("embedding dimension mismatch for " + word);
  vectors_[std::move(word)] = std::move(vec);
}

std::optional<std::span<const double>> EmbeddingTable::find(std::string_view word) const {
  const auto it = vectors_.find(std::string(word));
  if (it == vectors_.end()) return std::nullopt;
  return std::span<const double>(it->second);
}

std::optional<std::vector<double>> EmbeddingTable::phrase(std::string_view phrase) const {
  const auto tok = tokenize(phrase);
  if (tok.tokens.empty()) return std::nullopt;
  std::vector<double> sum(dim_, 0.0);
  for (const auto& t : tok.tokens) {
    const auto v = find(t);
    if (!v) return std::nullopt;
    for (std::size_t k = 0; k < dim_; ++k) sum[k] += (*v)[k];
  }
  for (double& s : sum) s /= static_cast<double>(tok.tokens.size());
  return sum;
}

LabelSet exact_match(const TokenizedCaption& caption, const CategoryVocabulary& vocab) {
  LabelSet out{{}, Provenance::exact};
  for_each_ngram(caption.tokens, vocab.max_phrase_tokens(), [&](const std::string& gram) {
    for (std::size_t c = 0; c < vocab.size(); ++c)
      if (vocab.classes()[c] == gram) out.present.insert(static_cast<int>(c));
  });
  return out;
}

LabelSet synonym_match(const TokenizedCaption& caption, const CategoryVocabulary& vocab) {
  LabelSet out{{}, Provenance::synonym};
  const auto& syn = vocab.synonyms();
  for_each_ngram(caption.tokens, vocab.max_phrase_tokens(), [&](const std::string& gram) {
    const auto it = syn.find(gram);
    if (it != syn.end()) out.present.insert(it->second);
  });
  return out;
}

namespace {

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0 || nb == 0) return 1.0;
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

LabelSet embedding_pseudo_label(const TokenizedCaption& caption, const EmbeddingTable& table,
                                const CategoryVocabulary& vocab) {
  std::vector<std::vector<double>> class_vecs;
  class_vecs.reserve(vocab.size());
  for (const auto& name : vocab.classes()) {
    auto v = table.phrase(name);
    if (!v) throw MissingClassEmbedding("no embedding for class '" + name + "'");
    class_vecs.push_back(std::move(*v));
  }
  LabelSet out{{}, Provenance::embedding};
  double best = std::numeric_limits<double>::infinity();
  int best_class = -1;
  for (std::size_t c = 0; c < class_vecs.size(); ++c) {
    for (const auto& tok : caption.tokens) {
      const auto v = table.find(tok);
      if (!v) continue;
      const double d = cosine_distance(class_vecs[c], *v);
      if (d < best) {
        best = d;
        best_class = static_cast<int>(c);
      }
    }
  }
  if (best_class >= 0) out.present.insert(best_class);
  return out;
}

LabelSet two_step_infer(const TokenizedCaption& caption, const CategoryVocabulary& vocab,
                        const TextClassifierParams& classifier, const EmbeddingTable& table) {
  auto exact = exact_match(caption, vocab);
  if (!exact.empty()) return exact;
  try {
    return classifier_predict(caption, table, classifier);
  } catch (const EmptyInput&) {
    return LabelSet{{}, Provenance::classifier};
  }
}

}  // namespace wsod
