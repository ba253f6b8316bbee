// Acceptance checks: one PASS/FAIL/SKIP line per criterion, exit status 1 on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "properties.hpp"
#include "wsod/detector.hpp"
#include "wsod/error.hpp"
#include "wsod/labels.hpp"
#include "wsod/oicr.hpp"
#include "wsod/synthetic.hpp"
#include "wsod/textclf.hpp"

using namespace wsod;
using namespace wsod::testing;
namespace fs = std::filesystem;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::pass;
  std::string detail;
};

Outcome failed(std::string why) { return {Status::fail, std::move(why)}; }

template <class... Args>
std::string format(const char* fmt, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// ---- 1 ---------------------------------------------------------------------

Outcome instance_target_oracle() {
  const auto o = check_property("instance targets vs naive loop", 1000, 1, compare_with_naive_targets);
  if (!o.ok()) return failed(*o.failure);
  // Row normalisation is exact: each nonzero entry of a row with k of them is 1/k.
  const auto rows = check_property("row-stochastic targets", 1000, 2, [](Rng& rng) -> std::optional<std::string> {
    const auto m = uniform_index(rng, 1, 20), C = uniform_index(rng, 1, 5);
    const auto boxes = random_boxes(rng, m, uniform(rng, 0, 1) < 0.5);
    const auto scores = random_stochastic_rows(rng, m, C + 1, true);
    const double thr[] = {0.3, 0.5, 0.7};
    const auto y = generate_instance_targets(boxes, scores, random_label_set(rng, C, 0.4), thr[uniform_index(rng, 0, 2)]);
    for (std::size_t i = 0; i < y.rows; ++i) {
      std::size_t k = 0;
      for (double v : y.row(i)) k += v != 0.0;
      if (k == 0) return "empty row";
      for (double v : y.row(i))
        if (v != 0.0 && v != 1.0 / double(k)) return "row " + std::to_string(i) + " is not uniform";
    }
    return std::nullopt;
  });
  if (!rows.ok()) return failed(*rows.failure);
  return {Status::pass, "1000 oracle comparisons, 1000 row checks"};
}

// ---- 2 ---------------------------------------------------------------------

Outcome gradient_checks() {
  const std::vector<std::pair<const char*, GradientComparison (*)(Rng&)>> checks{
      {"multiple-instance", gradcheck_mid},
      {"refinement", gradcheck_refinement},
      {"total", gradcheck_total},
      {"text", gradcheck_text}};
  std::string detail;
  for (const auto& [name, fn] : checks) {
    double worst = 0.0;
    for (std::uint64_t t = 0; t < 25; ++t) {
      Rng rng(1000 + t);
      const auto g = fn(rng);
      if (g.entries == 0) return failed(std::string(name) + ": no entries compared");
      worst = std::max(worst, g.relative_error);
      if (!(g.relative_error <= kGradientTolerance))
        return failed(format("%s instance %d: relative error %.3g", name, int(t), g.relative_error));
    }
    detail += format("%s max rel err %.2g; ", name, worst);
  }
  return {Status::pass, detail + "25 instances each"};
}

// ---- 3 ---------------------------------------------------------------------

Outcome metric_oracles() {
  for (std::uint64_t t = 0; t < 500; ++t) {
    Rng rng(5000 + t);
    const auto inst = random_detection_instance(rng, 8, 4);
    for (const bool eleven : {false, true}) {
      ApOptions opt;
      if (eleven) opt.interpolation = ApInterpolation::eleven_point;
      const auto got = average_precision(inst.dets, inst.gts, 0, opt);
      const auto want = prefix_oracle_ap(inst.dets, inst.gts, 0, 0.5, eleven);
      if (got.has_value() != want.has_value() || (got && std::fabs(*got - *want) > 1e-12))
        return failed(format("AP differs from the prefix oracle on instance %d", int(t)));
    }
  }
  const std::vector<GroundTruthBox> two{{"i", {0, 0, 10, 10}, 0}, {"i", {20, 20, 30, 30}, 0}};
  const std::vector<Detection> ranked{{"i", {0, 0, 10, 10}, 0, 0.9}, {"i", {50, 50, 60, 60}, 0, 0.8},
                                      {"i", {20, 20, 30, 30}, 0, 0.7}};
  const auto ap = average_precision(ranked, two, 0);
  if (!ap || std::fabs(*ap - 5.0 / 6.0) > 1e-15) return failed("hand AP case is not 5/6");
  const Box a{0, 0, 10, 10}, b{0, 0, 10, 9};
  if (iou(a, b) != 0.9 || naive_iou(a, b) != 0.9) return failed("IoU case is not 0.9");
  for (std::uint64_t t = 0; t < 300; ++t) {
    Rng rng(9000 + t);
    const Box g = random_grid_box(rng, 20);
    const Box d = random_grid_box(rng, 20);
    if (iou(g, d) == 0.0) continue;
    const auto s = coco_ap_sweep({{"i", d, 0, 0.5}}, {{"i", g, 0}}, 1);
    if (!s.ap || std::fabs(*s.ap - single_detection_sweep(iou(g, d))) > 1e-12)
      return failed(format("COCO sweep differs from threshold counting on case %d", int(t)));
  }
  return {Status::pass, "500 x2 AP oracle comparisons, 5/6 and 0.9 cases, 300 sweep cases"};
}

// ---- 4 and 5 share one synthetic corpus --------------------------------------

struct Corpus {
  TempDir dir{"wsod-accept"};
  ToyFeatureProvider provider;
  CategoryVocabulary vocab;
  DatasetManifest train, test;
  SyntheticSummary summary;

  Corpus() {
    summary = make_synthetic(dir.path(), SyntheticOptions{}, provider);
    vocab = load_class_list(dir / "classes.txt");
    vocab.load_synonyms(dir / "synonyms.tsv");
    train = load_manifest(dir / "train.jsonl");
    test = load_manifest(dir / "test.jsonl");
  }

  double train_and_score(const ImageLabels& labels, std::size_t refinements) const {
    TrainConfig cfg;
    cfg.refinements = refinements;
    cfg.steps = 2000;
    cfg.seed = 1;
    const auto res = train_detector(train, labels, cfg, vocab, provider);
    const auto dets = detect(test, res.final.params, cfg, provider);
    return mean_average_precision(dets, ground_truth_boxes(test, vocab), vocab.size()).mean.value_or(0.0);
  }
};

Outcome synthetic_detection(const Corpus& c) {
  if (c.summary.train_images + c.summary.test_images != 200 || c.summary.test_images != 50 || c.vocab.size() != 4)
    return failed("synthetic corpus has the wrong shape");
  const auto gold = build_image_labels(c.train, LabelStrategy::gold, {&c.vocab, nullptr, nullptr});
  const auto t0 = std::chrono::steady_clock::now();
  const double k3 = c.train_and_score(gold, 3);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double k0 = c.train_and_score(gold, 0);
  const auto detail = format("mAP@0.5 K=3 %.4f, K=0 %.4f, K=3 training+detection %.0f s", k3, k0, secs);
  if (k3 < 0.90) return failed(detail + " (K=3 below 0.90)");
  if (k3 < k0) return failed(detail + " (refinement lowers mAP)");
  if (secs > 15 * 60) return failed(detail + " (slower than 15 min)");
  return {Status::pass, detail};
}

Outcome caption_pathway(const Corpus& c) {
  const auto table = EmbeddingTable::load(c.dir / "embeddings.txt");
  const auto examples =
      caption_examples(load_manifest(c.dir / "textclf.jsonl", {.require_proposals = false}), c.vocab);
  const auto clf = train_text_classifier(examples, table, c.vocab.size(), TextTrainConfig{}).params;
  const LabelResources res{&c.vocab, &table, &clf};
  const auto exact = build_image_labels(c.train, LabelStrategy::exact, res);
  const auto two_step = build_image_labels(c.train, LabelStrategy::two_step, res);

  std::vector<LabelSet> gold, pe, pc;
  for (const auto& r : c.train.records) {
    gold.push_back(gold_label_set(r, c.vocab));
    pe.push_back(exact.labels.at(r.image_id));
    pc.push_back(two_step.labels.at(r.image_id));
  }
  const auto pr_e = eval_label_pr(pe, gold, c.vocab.size());
  const auto pr_c = eval_label_pr(pc, gold, c.vocab.size());
  if (!pr_e.precision || !pr_e.recall || !pr_c.precision || !pr_c.recall) return failed("label P/R undefined");
  auto detail = format("labels P/R exact %.2f/%.2f, exact+classifier %.2f/%.2f", 100 * *pr_e.precision,
                       100 * *pr_e.recall, 100 * *pr_c.precision, 100 * *pr_c.recall);
  if (!(*pr_c.recall > *pr_e.recall)) return failed(detail + " (recall not higher)");
  if (*pr_c.precision < *pr_e.precision - 0.02) return failed(detail + " (precision drops more than 2 points)");

  const double map_e = c.train_and_score(exact, 3);
  const double map_c = c.train_and_score(two_step, 3);
  detail += format("; mAP@0.5 exact %.4f, exact+classifier %.4f", map_e, map_c);
  if (map_c < map_e) return failed(detail + " (detector mAP lower)");
  return {Status::pass, detail};
}

// ---- 6 ---------------------------------------------------------------------

// WSOD_COCO_DIR holds classes.txt, embeddings.txt (e.g. GloVe), train.jsonl and
// val.jsonl (captions plus gold_labels per image), as written by
// tools/coco_to_manifest.py.
Outcome coco_text_classifier() {
  const char* root = std::getenv("WSOD_COCO_DIR");
  if (!root || !*root) return {Status::skip, "WSOD_COCO_DIR not set"};
  const fs::path dir(root);
  for (const char* f : {"classes.txt", "embeddings.txt", "train.jsonl", "val.jsonl"})
    if (!fs::exists(dir / f)) return failed(std::string("missing ") + f + " in WSOD_COCO_DIR");
  const auto vocab = load_class_list(dir / "classes.txt");
  const auto train = load_manifest(dir / "train.jsonl", {.require_proposals = false});
  const auto val = load_manifest(dir / "val.jsonl", {.require_proposals = false});

  // Every 20th training image: 5% of the captions.
  DatasetManifest subset;
  for (std::size_t i = 0; i < train.size(); i += 20) subset.records.push_back(train.records[i]);
  const auto examples = caption_examples(subset, vocab);

  // Only words that occur in some caption or class name are kept in memory.
  std::set<std::string> words;
  for (const auto* m : {&train, &val})
    for (const auto& r : m->records)
      for (const auto& cap : r.captions)
        for (auto& t : tokenize(cap).tokens) words.insert(std::move(t));
  for (const auto& name : vocab.classes())
    for (auto& t : tokenize(name).tokens) words.insert(std::move(t));
  const auto table = EmbeddingTable::load(dir / "embeddings.txt",
                                          [&](std::string_view w) { return words.count(std::string(w)) != 0; });
  TextTrainConfig cfg;
  cfg.steps = 20000;
  const auto clf = train_text_classifier(examples, table, vocab.size(), cfg).params;

  std::vector<LabelSet> pred, gold;
  for (const auto& r : val.records) {
    LabelSet p;
    for (const auto& cap : r.captions) {
      try {
        const auto l = classifier_predict(tokenize(cap), table, clf);
        p.present.insert(l.present.begin(), l.present.end());
      } catch (const EmptyInput&) {
      }
    }
    pred.push_back(p);
    gold.push_back(gold_label_set(r, vocab));
  }
  const auto pr = eval_label_pr(pred, gold, vocab.size());
  const auto detail = format("%zu training examples, val precision %.3f recall %.3f", examples.size(),
                             pr.precision.value_or(0.0), pr.recall.value_or(0.0));
  if (pr.precision.value_or(0.0) < 0.84 || pr.recall.value_or(0.0) < 0.55) return failed(detail);
  return {Status::pass, detail};
}

// ---- 7 ---------------------------------------------------------------------

Outcome property_suites() {
  std::size_t properties = 0, trials = 0;
  for (const auto& suite : all_property_suites())
    for (const auto& o : suite.run(kPropertySeed)) {
      if (!o.ok()) return failed(suite.name + ": " + o.name + ": " + *o.failure);
      ++properties;
      trials += o.trials;
    }
  // End-to-end determinism: two identical runs give byte-identical detection dumps.
  TempDir dir("wsod-determinism");
  const auto provider = tiny_provider();
  make_synthetic(dir.path(), tiny_synthetic_options(11), provider);
  auto vocab = load_class_list(dir / "classes.txt");
  const auto train = load_manifest(dir / "train.jsonl"), test = load_manifest(dir / "test.jsonl");
  const auto gold = build_image_labels(train, LabelStrategy::gold, {&vocab, nullptr, nullptr});
  auto cfg = tiny_train_config(3, 60);
  cfg.scales = {400, 600};
  cfg.flip = true;
  std::string dumps[2];
  for (int run = 0; run < 2; ++run) {
    const auto res = train_detector(train, gold, cfg, vocab, provider);
    const auto path = dir / ("dets_" + std::to_string(run) + ".tsv");
    write_detections(path, detect(test, res.final.params, cfg, provider), vocab);
    dumps[run] = read_text(path);
  }
  if (dumps[0].empty() || dumps[0] != dumps[1]) return failed("detection dumps differ between identical runs");
  return {Status::pass, format("%zu properties, %zu trials, dumps identical", properties, trials)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0: no limit checked here
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  std::unique_ptr<Corpus> corpus;
  auto shared = [&]() -> const Corpus& {
    if (!corpus) corpus = std::make_unique<Corpus>();
    return *corpus;
  };
  const std::vector<Criterion> criteria{
      {1, "instance targets match the naive oracle", 10, instance_target_oracle},
      {2, "gradients match finite differences", 30, gradient_checks},
      {3, "metrics match brute-force oracles", 30, metric_oracles},
      {4, "synthetic detection with refinement", 0, [&] { return synthetic_detection(shared()); }},
      {5, "caption supervision pathway", 0, [&] { return caption_pathway(shared()); }},
      {6, "text classifier on COCO captions", 3600, coco_text_classifier},
      {7, "property suites and determinism", 0, property_suites},
  };

  bool any_fail = false;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = failed(std::string("threw: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.status == Status::pass && c.budget_seconds > 0 && secs > c.budget_seconds)
      o = failed(o.detail + format(" (took %.1f s, budget %.0f s)", secs, c.budget_seconds));
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::skip ? "SKIP" : "FAIL";
    any_fail |= o.status == Status::fail;
    std::printf("%s criterion %d: %s [%.1f s] %s\n", tag, c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return any_fail ? 1 : 0;
}
