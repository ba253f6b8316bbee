#include "wsod/textclf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "json_io.hpp"
#include "wsod/adagrad.hpp"
#include "wsod/error.hpp"

namespace wsod {

namespace {

struct PooledForward {
  std::vector<std::string> words;                  // tokens that embed, in caption order
  std::vector<std::span<const double>> embedded;   // their vectors
  std::vector<double> pooled;                      // max over tokens of ReLU(projection)
  std::vector<int> winner;                         // token index per hidden unit, -1 if inactive
  std::vector<double> logits;
};

std::optional<std::span<const double>> lookup(const std::string& word, const EmbeddingTable& table,
                                              const TextClassifierParams& params) {
  if (const auto it = params.tuned_embeddings.find(word); it != params.tuned_embeddings.end())
    return std::span<const double>(it->second);
  return table.find(word);
}

PooledForward pooled_forward(const TokenizedCaption& caption, const EmbeddingTable& table,
                             const TextClassifierParams& p) {
  PooledForward f;
  for (const auto& tok : caption.tokens) {
    const auto v = lookup(tok, table, p);
    if (!v) continue;
    if (v->size() != p.embedding_dim())
      throw ShapeMismatch("embedding dimension " + std::to_string(v->size()) +
                          " does not match classifier input " + std::to_string(p.embedding_dim()));
    f.words.push_back(tok);
    f.embedded.push_back(*v);
  }
  if (f.embedded.empty()) throw EmptyInput("no caption token has an embedding: '" + caption.source + "'");

  const std::size_t hidden = p.hidden_dim();
  f.pooled.assign(hidden, 0.0);
  f.winner.assign(hidden, -1);
  for (std::size_t t = 0; t < f.embedded.size(); ++t) {
    const auto e = f.embedded[t];
    for (std::size_t j = 0; j < hidden; ++j) {
      const auto w = p.projection.weight.row(j);
      double a = p.projection.bias[j];
      for (std::size_t k = 0; k < e.size(); ++k) a += w[k] * e[k];
      // ReLU then max; a unit stays at zero (winner -1) unless some token activates it.
      if (a > f.pooled[j]) {
        f.pooled[j] = a;
        f.winner[j] = static_cast<int>(t);
      }
    }
  }
  f.logits.assign(p.num_classes(), 0.0);
  for (std::size_t c = 0; c < p.num_classes(); ++c) {
    const auto w = p.output.weight.row(c);
    double z = p.output.bias[c];
    for (std::size_t j = 0; j < hidden; ++j) z += w[j] * f.pooled[j];
    f.logits[c] = z;
  }
  return f;
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

template <class Fn>
void for_each_array(TextClassifierParams& p, Fn&& fn) {
  fn(std::span<double>(p.projection.weight.data));
  fn(std::span<double>(p.projection.bias));
  fn(std::span<double>(p.output.weight.data));
  fn(std::span<double>(p.output.bias));
}

TextClassifierParams zeros_like(const TextClassifierParams& p) {
  TextClassifierParams g;
  g.projection = AffineLayer(p.embedding_dim(), p.hidden_dim());
  g.output = AffineLayer(p.hidden_dim(), p.num_classes());
  g.threshold = p.threshold;
  return g;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

TextClassifierParams make_text_classifier(std::size_t embedding_dim, std::size_t hidden_dim,
                                          std::size_t num_classes, std::uint64_t seed) {
  TextClassifierParams p;
  p.projection = AffineLayer(embedding_dim, hidden_dim);
  p.output = AffineLayer(hidden_dim, num_classes);
  std::mt19937_64 rng(seed);
  p.projection.init_uniform(rng);
  p.output.init_uniform(rng);
  return p;
}

std::vector<double> classifier_forward(const TokenizedCaption& caption, const EmbeddingTable& table,
                                       const TextClassifierParams& params) {
  return pooled_forward(caption, table, params).logits;
}

LabelSet classifier_predict(const TokenizedCaption& caption, const EmbeddingTable& table,
                            const TextClassifierParams& params) {
  const auto logits = classifier_forward(caption, table, params);
  LabelSet out{{}, Provenance::classifier};
  for (std::size_t c = 0; c < logits.size(); ++c)
    if (sigmoid(logits[c]) >= params.threshold) out.present.insert(static_cast<int>(c));
  if (out.present.empty() && !logits.empty()) {
    const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
    out.present.insert(static_cast<int>(best));
  }
  return out;
}

double text_example_loss(const LabeledCaptionExample& example, const EmbeddingTable& table,
                         const TextClassifierParams& p, TextClassifierParams* grad,
                         std::unordered_map<std::string, std::vector<double>>* embedding_grad) {
  const auto f = pooled_forward(example.caption, table, p);
  const std::size_t C = p.num_classes();
  const auto y = multi_hot(example.gold, C);
  double loss = 0.0;
  std::vector<double> dz(C);
  for (std::size_t c = 0; c < C; ++c) {
    loss += softplus(f.logits[c]) - y[c] * f.logits[c];
    dz[c] = (sigmoid(f.logits[c]) - y[c]) / static_cast<double>(C);
  }
  loss /= static_cast<double>(C);
  if (!grad) return loss;

  const std::size_t hidden = p.hidden_dim();
  std::vector<double> dpooled(hidden, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    auto gw = grad->output.weight.row(c);
    const auto w = p.output.weight.row(c);
    for (std::size_t j = 0; j < hidden; ++j) {
      gw[j] += dz[c] * f.pooled[j];
      dpooled[j] += dz[c] * w[j];
    }
    grad->output.bias[c] += dz[c];
  }
  for (std::size_t j = 0; j < hidden; ++j) {
    if (f.winner[j] < 0) continue;
    const auto t = static_cast<std::size_t>(f.winner[j]);
    const auto e = f.embedded[t];
    auto gw = grad->projection.weight.row(j);
    for (std::size_t k = 0; k < e.size(); ++k) gw[k] += dpooled[j] * e[k];
    grad->projection.bias[j] += dpooled[j];
    if (embedding_grad) {
      auto& ge = (*embedding_grad)[f.words[t]];
      ge.resize(e.size(), 0.0);
      const auto w = p.projection.weight.row(j);
      for (std::size_t k = 0; k < e.size(); ++k) ge[k] += dpooled[j] * w[k];
    }
  }
  return loss;
}

std::optional<double> text_dataset_loss(const std::vector<LabeledCaptionExample>& data,
                                        const EmbeddingTable& table,
                                        const TextClassifierParams& params) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& ex : data) {
    try {
      sum += text_example_loss(ex, table, params, nullptr);
      ++n;
    } catch (const EmptyInput&) {
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

TextTrainResult train_text_classifier(const std::vector<LabeledCaptionExample>& data,
                                      const EmbeddingTable& table, std::size_t num_classes,
                                      const TextTrainConfig& config) {
  if (data.empty()) throw ConfigError("train_text_classifier: empty training set");
  if (config.batch_size == 0 || config.lr <= 0 || config.hidden_dim == 0)
    throw ConfigError("train_text_classifier: batch_size, lr and hidden_dim must be positive");
  if (!(config.threshold > 0 && config.threshold < 1))
    throw ConfigError("train_text_classifier: threshold must lie in (0, 1)");

  TextTrainResult result;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const bool embeds = std::any_of(data[i].caption.tokens.begin(), data[i].caption.tokens.end(),
                                    [&](const std::string& t) { return table.find(t).has_value(); });
    if (embeds)
      usable.push_back(i);
    else
      ++result.skipped_examples;
  }
  if (usable.empty()) throw ConfigError("train_text_classifier: no example has an embedded token");

  auto& p = result.params;
  p = make_text_classifier(table.dim(), config.hidden_dim, num_classes, config.seed);
  p.threshold = config.threshold;

  const Adagrad opt{config.lr};
  auto accum = zeros_like(p);
  for_each_array(accum, [&](std::span<double> a) { std::fill(a.begin(), a.end(), opt.initial_accumulator); });
  std::unordered_map<std::string, std::vector<double>> emb_accum;

  std::vector<std::size_t> order = usable;
  std::size_t cursor = order.size();
  std::size_t epoch = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    auto grad = zeros_like(p);
    std::unordered_map<std::string, std::vector<double>> emb_grad;
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        std::mt19937_64 rng(mix_seed(config.seed, epoch++));
        order = usable;
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const auto& ex = data[order[cursor++]];
      batch_loss += text_example_loss(ex, table, p, &grad, config.train_embeddings ? &emb_grad : nullptr);
    }
    const double inv = 1.0 / static_cast<double>(config.batch_size);
    for_each_array(grad, [&](std::span<double> g) {
      for (double& v : g) v *= inv;
    });
    // Walk params, grads and accumulators in lockstep.
    std::vector<std::span<double>> ps, gs, as;
    for_each_array(p, [&](std::span<double> s) { ps.push_back(s); });
    for_each_array(grad, [&](std::span<double> s) { gs.push_back(s); });
    for_each_array(accum, [&](std::span<double> s) { as.push_back(s); });
    for (std::size_t i = 0; i < ps.size(); ++i) opt.step(ps[i], gs[i], as[i]);

    if (config.train_embeddings) {
      std::vector<std::string> words;
      for (const auto& [w, _] : emb_grad) words.push_back(w);
      std::sort(words.begin(), words.end());
      for (const auto& w : words) {
        auto& g = emb_grad[w];
        for (double& v : g) v *= inv;
        auto [it, inserted] = p.tuned_embeddings.try_emplace(w);
        if (inserted) {
          const auto base = table.find(w);
          it->second.assign(base->begin(), base->end());
        }
        auto& a = emb_accum[w];
        if (a.empty()) a.assign(g.size(), opt.initial_accumulator);
        opt.step(it->second, g, a);
      }
    }
    result.loss_history.push_back(batch_loss * inv);
  }
  return result;
}

LabelPR eval_label_pr(const std::vector<LabelSet>& predicted, const std::vector<LabelSet>& gold,
                      std::size_t num_classes) {
  if (predicted.size() != gold.size())
    throw ShapeMismatch("eval_label_pr: " + std::to_string(predicted.size()) + " predictions for " +
                        std::to_string(gold.size()) + " gold sets");
  LabelPR out;
  out.per_class.resize(num_classes);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (std::size_t c = 0; c < num_classes; ++c) {
      const bool p = predicted[i].contains(static_cast<int>(c));
      const bool g = gold[i].contains(static_cast<int>(c));
      auto& pc = out.per_class[c];
      if (p && g) ++pc.true_positives;
      if (p && !g) ++pc.false_positives;
      if (!p && g) ++pc.false_negatives;
    }
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (auto& pc : out.per_class) {
    tp += pc.true_positives;
    fp += pc.false_positives;
    fn += pc.false_negatives;
    if (pc.true_positives + pc.false_positives)
      pc.precision = static_cast<double>(pc.true_positives) / static_cast<double>(pc.true_positives + pc.false_positives);
    if (pc.true_positives + pc.false_negatives)
      pc.recall = static_cast<double>(pc.true_positives) / static_cast<double>(pc.true_positives + pc.false_negatives);
  }
  if (tp + fp) out.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn) out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return out;
}

void save_text_classifier(const std::filesystem::path& path, const TextClassifierParams& params,
                          const CategoryVocabulary& vocab) {
  if (vocab.size() != params.num_classes())
    throw ShapeMismatch("classifier has " + std::to_string(params.num_classes()) + " classes, vocabulary " +
                        std::to_string(vocab.size()));
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << vocab.hash();
  nlohmann::json j{{"format", "wsod.textclf"},
                   {"version", 1},
                   {"vocab_hash", hash.str()},
                   {"classes", vocab.classes()},
                   {"embedding_dim", params.embedding_dim()},
                   {"hidden_dim", params.hidden_dim()},
                   {"num_classes", params.num_classes()},
                   {"threshold", params.threshold},
                   {"projection", detail::to_json(params.projection)},
                   {"output", detail::to_json(params.output)},
                   {"tuned_embeddings", params.tuned_embeddings}};
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump() << '\n';
}

TextClassifierParams load_text_classifier(const std::filesystem::path& path,
                                          const CategoryVocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open classifier checkpoint " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("classifier checkpoint: ") + e.what());
  }
  if (j.value("format", "") != "wsod.textclf") throw ParseError("not a text classifier checkpoint");
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << vocab.hash();
  if (j.at("vocab_hash").get<std::string>() != hash.str())
    throw ConfigError("classifier checkpoint was trained for a different class vocabulary");
  TextClassifierParams p;
  p.projection = detail::affine_from_json(j.at("projection"));
  p.output = detail::affine_from_json(j.at("output"));
  p.threshold = j.at("threshold").get<double>();
  p.tuned_embeddings = j.at("tuned_embeddings").get<std::unordered_map<std::string, std::vector<double>>>();
  if (p.output.in_dim() != p.projection.out_dim() || p.num_classes() != vocab.size() ||
      p.embedding_dim() != j.at("embedding_dim").get<std::size_t>())
    throw ParseError("classifier checkpoint shapes are inconsistent");
  return p;
}

}  // namespace wsod
