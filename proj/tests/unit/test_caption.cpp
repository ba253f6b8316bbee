#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "generators.hpp"
#include "wsod/caption.hpp"
#include "wsod/error.hpp"
#include "wsod/labels.hpp"
#include "wsod/textclf.hpp"

using namespace wsod;
using Tokens = std::vector<std::string>;

namespace {

CategoryVocabulary coco_like() {
  CategoryVocabulary v({"person", "bicycle", "car", "dog", "dining table"});
  v.add_synonym("man", "person");
  v.add_synonym("bike", "bicycle");
  return v;
}

std::set<int> ids(std::initializer_list<int> l) { return std::set<int>(l); }

EmbeddingTable table_of(const std::map<std::string, std::vector<double>>& m) {
  EmbeddingTable t;
  for (const auto& [w, v] : m) t.insert(w, v);
  return t;
}

}  // namespace

TEST_SUITE("caption") {

TEST_CASE("tokenize lowercases, strips punctuation and splits") {
  CHECK(tokenize("A man is crossing the street.").tokens == Tokens{"a", "man", "is", "crossing", "the", "street"});
  CHECK(tokenize("").tokens.empty());
  CHECK(tokenize("   \t ").tokens.empty());
  const auto t = tokenize("a person is riding a bicycle on the side of a bridge.").tokens;
  CHECK(std::count(t.begin(), t.end(), "person") == 1);
  CHECK(std::count(t.begin(), t.end(), "bicycle") == 1);
  CHECK(tokenize("Hello,world!  It's\tme").tokens == Tokens{"helloworld", "its", "me"});
  CHECK(tokenize("a dog").source == "a dog");
}

TEST_CASE("exact match finds class names only") {
  const auto v = coco_like();
  CHECK(exact_match(tokenize("a person is riding a bicycle on the side of a bridge."), v).present == ids({0, 1}));
  CHECK(exact_match(tokenize("a bicyclist peddling down a busy city street."), v).empty());
  CHECK(exact_match(tokenize(""), v).empty());
  CHECK(exact_match(tokenize("a man with his bike"), v).empty());
  CHECK(exact_match(tokenize("a person"), v).provenance == Provenance::exact);
}

TEST_CASE("multi-word class names match as contiguous n-grams") {
  const auto v = coco_like();
  CHECK(exact_match(tokenize("food on the dining table"), v).present == ids({4}));
  CHECK(exact_match(tokenize("the table for dining"), v).empty());
  CHECK(exact_match(tokenize("Dining, Table!"), v).present == ids({4}));
}

TEST_CASE("synonym match extends exact match") {
  const auto v = coco_like();
  const auto s = synonym_match(tokenize("a man is crossing the street with his bike."), v);
  CHECK(s.present == ids({0, 1}));
  CHECK(s.provenance == Provenance::synonym);
  CHECK(synonym_match(tokenize("a person is riding a bicycle"), v).present == ids({0, 1}));
  CHECK(synonym_match(tokenize("clouds over the hills"), v).empty());
}

TEST_CASE("vocabulary rejects unknown synonym targets and duplicate classes") {
  auto v = coco_like();
  CHECK_THROWS_AS(v.add_synonym("kitten", "cat"), ConfigError);
  CHECK_THROWS_AS(CategoryVocabulary({"dog", "Dog"}), ConfigError);
  // A class name cannot be redirected to another class.
  v.add_synonym("dog", "person");
  CHECK(synonym_match(tokenize("dog"), v).present == ids({3}));
  CHECK(v.index_of("Dining Table") == 4);
  CHECK(!v.index_of("cat"));
}

TEST_CASE("vocabulary hash depends on the ordered class names") {
  CHECK(CategoryVocabulary({"a", "b"}).hash() == CategoryVocabulary({"a", "b"}).hash());
  CHECK(CategoryVocabulary({"a", "b"}).hash() != CategoryVocabulary({"b", "a"}).hash());
}

TEST_CASE("embedding pseudo label picks the nearest class by cosine distance") {
  CategoryVocabulary v({"dog", "cat", "car"});
  auto t = table_of({{"dog", {1, 0, 0}}, {"cat", {0, 1, 0}}, {"car", {0, 0, 1}},
                     {"puppy", {0.9, 0.2, 0}}, {"wheels", {0.1, 0.1, 1}}, {"the", {0.3, 0.3, 0.3}}});
  SUBCASE("a class name is at distance zero from itself") {
    CHECK(embedding_pseudo_label(tokenize("the cat"), t, v).present == ids({1}));
  }
  SUBCASE("matches a brute-force scan over token and class pairs") {
    const auto cap = tokenize("puppy wheels the");
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < 3; ++c)
      for (const auto& w : cap.tokens) {
        const auto a = *t.find(v.name(c)), b = *t.find(w);
        double dot = 0, na = 0, nb = 0;
        for (int k = 0; k < 3; ++k) dot += a[k] * b[k], na += a[k] * a[k], nb += b[k] * b[k];
        const double d = 1 - dot / std::sqrt(na * nb);
        if (d < best_d) best_d = d, best = c;
      }
    const auto got = embedding_pseudo_label(cap, t, v);
    CHECK(got.present == ids({best}));
    CHECK(got.provenance == Provenance::embedding);
  }
  SUBCASE("out-of-vocabulary captions give nothing") {
    CHECK(embedding_pseudo_label(tokenize("zebra giraffe"), t, v).empty());
  }
  SUBCASE("a class without an embedding is an error") {
    CategoryVocabulary w({"dog", "bus"});
    CHECK_THROWS_AS(embedding_pseudo_label(tokenize("dog"), t, w), MissingClassEmbedding);
  }
}

TEST_CASE("multi-word class embeddings average their tokens") {
  auto t = table_of({{"dining", {1, 0}}, {"table", {0, 1}}});
  const auto p = t.phrase("dining table");
  REQUIRE(p);
  CHECK((*p)[0] == doctest::Approx(0.5));
  CHECK((*p)[1] == doctest::Approx(0.5));
  CHECK(!t.phrase("dining chair"));
}

TEST_CASE("two-step rule prefers exact matches and falls back to the classifier") {
  const auto v = coco_like();
  auto t = table_of({{"a", {0.1, 0.0}}, {"bicyclist", {0.0, 2.0}}, {"person", {1.0, 0.0}}, {"street", {0.2, 0.2}}});
  SUBCASE("exact path") {
    const auto clf = make_text_classifier(2, 4, v.size(), 1);
    const auto l = two_step_infer(tokenize("a person is riding a bicycle on the side of a bridge."), v, clf, t);
    CHECK(l.present == ids({0, 1}));
    CHECK(l.provenance == Provenance::exact);
  }
  SUBCASE("empty caption takes the classifier path") {
    const auto clf = make_text_classifier(2, 4, v.size(), 1);
    const auto l = two_step_infer(tokenize(""), v, clf, t);
    CHECK(l.provenance == Provenance::classifier);
    CHECK(l.empty());
  }
  SUBCASE("a trained classifier recovers the unmatched object") {
    std::vector<LabeledCaptionExample> data{
        {tokenize("a bicyclist down a street"), {{1}, Provenance::gold}},
        {tokenize("a person"), {{0}, Provenance::gold}},
        {tokenize("a street"), {{}, Provenance::gold}},
    };
    TextTrainConfig cfg;
    cfg.hidden_dim = 16;
    cfg.steps = 400;
    cfg.batch_size = 3;
    const auto clf = train_text_classifier(data, t, v.size(), cfg).params;
    const auto l = two_step_infer(tokenize("a bicyclist peddling down a busy city street."), v, clf, t);
    CHECK(l.provenance == Provenance::classifier);
    CHECK(l.contains(1));
  }
}

TEST_CASE("image labels follow the chosen strategy") {
  const auto v = coco_like();
  DatasetManifest m;
  ManifestRecord r;
  r.image_id = "bridge";
  r.captions = {"a person is riding a bicycle on the side of a bridge.",
                "a man is crossing the street with his bike.", "a bicyclist peddling down a busy city street."};
  r.gold_labels = std::vector<std::string>{"person", "bicycle"};
  m.records.push_back(r);
  ManifestRecord blank;
  blank.image_id = "blank";
  blank.captions = {"clouds"};
  m.records.push_back(blank);

  const auto exact = build_image_labels(m, LabelStrategy::exact, {&v, nullptr, nullptr});
  CHECK(exact.labels.at("bridge").present == ids({0, 1}));
  CHECK(exact.empty_images == std::vector<std::string>{"blank"});
  const auto gold = build_image_labels(m, LabelStrategy::gold, {&v, nullptr, nullptr});
  CHECK(gold.labels.at("bridge").present == ids({0, 1}));
  CHECK(gold.labels.at("bridge").provenance == Provenance::gold);
  CHECK(build_image_labels(m, LabelStrategy::synonym, {&v, nullptr, nullptr}).labels.at("bridge").present ==
        ids({0, 1}));
  CHECK_THROWS_AS(build_image_labels(m, LabelStrategy::embedding, {&v, nullptr, nullptr}), ConfigError);
  CHECK_THROWS_AS(build_image_labels(m, LabelStrategy::two_step, {&v, nullptr, nullptr}), ConfigError);
}

TEST_CASE("two-step labelling of a caption without matches uses the classifier's labels") {
  CategoryVocabulary v({"dog", "cat"});
  auto t = table_of({{"hound", {1, 0}}, {"sleeps", {0, 1}}});
  auto clf = make_text_classifier(2, 2, 2, 3);
  clf.projection.set_zero();
  clf.output.set_zero();
  clf.projection.weight(0, 0) = 1.0;
  clf.output.weight(0, 0) = 10.0;
  clf.output.bias = {-1.0, -5.0};
  DatasetManifest m;
  ManifestRecord r;
  r.image_id = "x";
  r.captions = {"the hound sleeps"};
  m.records.push_back(r);
  const auto l = build_image_labels(m, LabelStrategy::two_step, {&v, &t, &clf});
  CHECK(l.labels.at("x").present == ids({0}));
  CHECK(l.labels.at("x").provenance == Provenance::classifier);
}

TEST_CASE("label strategies parse by name") {
  CHECK(parse_label_strategy("two-step") == LabelStrategy::two_step);
  CHECK(parse_label_strategy("two_step") == LabelStrategy::two_step);
  CHECK(parse_label_strategy("synonym") == LabelStrategy::synonym);
  CHECK(!parse_label_strategy("glove"));
}

TEST_CASE("caption examples per caption or per image") {
  const auto v = coco_like();
  DatasetManifest m;
  ManifestRecord r;
  r.image_id = "a";
  r.captions = {"a dog", "a car"};
  r.gold_labels = std::vector<std::string>{"dog", "car"};
  m.records.push_back(r);
  ManifestRecord unlabeled;
  unlabeled.image_id = "b";
  unlabeled.captions = {"a person"};
  m.records.push_back(unlabeled);
  CHECK(caption_examples(m, v).size() == 2);
  const auto joined = caption_examples(m, v, true);
  REQUIRE(joined.size() == 1);
  CHECK(joined[0].caption.tokens == Tokens{"a", "dog", "a", "car"});
  CHECK(joined[0].gold.present == ids({2, 3}));
}

}
