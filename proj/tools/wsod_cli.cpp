// Command-line front end: label inference, text-classifier and detector
// training, detection, evaluation and synthetic data generation.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wsod/caption.hpp"
#include "wsod/config.hpp"
#include "wsod/detector.hpp"
#include "wsod/error.hpp"
#include "wsod/labels.hpp"
#include "wsod/manifest.hpp"
#include "wsod/report.hpp"
#include "wsod/synthetic.hpp"
#include "wsod/textclf.hpp"

namespace fs = std::filesystem;
using namespace wsod;

namespace {

// Every TrainConfig key becomes --key-name; precedence is flag > env > file > default.
struct ConfigFlags {
  std::optional<fs::path> file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "flat key = value config file")->check(CLI::ExistingFile);
    for (const auto& [key, def] : TrainConfig{}.to_map()) {
      std::string flag = "--" + key;
      for (auto& ch : flag)
        if (ch == '_') ch = '-';
      app->add_option_function<std::string>(
          flag, [this, key = key](const std::string& v) { values[key] = v; }, "default " + def);
    }
  }

  TrainConfig resolve(TrainConfig base = {}) const {
    if (file) apply_config_file(base, *file);
    apply_env_overrides(base);
    for (const auto& [k, v] : values) base.set(k, v);
    base.validate();
    return base;
  }
};

struct VocabFlags {
  fs::path classes;
  std::optional<fs::path> synonyms;

  void attach(CLI::App* app, bool with_synonyms) {
    app->add_option("--classes", classes, "class list, one name per line")->required()->check(CLI::ExistingFile);
    if (with_synonyms) app->add_option("--synonyms", synonyms, "word<TAB>class lines")->check(CLI::ExistingFile);
  }

  CategoryVocabulary load() const {
    auto vocab = load_class_list(classes);
    if (synonyms) vocab.load_synonyms(*synonyms);
    return vocab;
  }
};

ToyFeatureProvider provider_from(std::size_t channels, std::uint64_t seed) { return ToyFeatureProvider(channels, seed); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised detection from captions"};
  app.require_subcommand(1);

  // make-synthetic
  auto* synth = app.add_subcommand("make-synthetic", "write a synthetic captioned detection dataset");
  fs::path synth_out;
  SyntheticOptions synth_opt;
  std::size_t channels = 12;
  std::uint64_t provider_seed = 7;
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--images", synth_opt.num_images, "total images")->capture_default_str();
  synth->add_option("--test-images", synth_opt.test_images)->capture_default_str();
  synth->add_option("--num-classes", synth_opt.num_classes)->capture_default_str();
  synth->add_option("--size", synth_opt.image_size)->capture_default_str();
  synth->add_option("--grid", synth_opt.grid)->capture_default_str();
  synth->add_option("--paraphrase-rate", synth_opt.paraphrase_rate)->capture_default_str();
  synth->add_option("--labeled-fraction", synth_opt.labeled_fraction)->capture_default_str();
  synth->add_option("--seed", synth_opt.seed)->capture_default_str();
  synth->add_option("--channels", channels, "feature channels")->capture_default_str();
  synth->add_option("--provider-seed", provider_seed)->capture_default_str();

  // train-textclf
  auto* ttc = app.add_subcommand("train-textclf", "train the caption classifier on gold-labelled captions");
  fs::path ttc_data, ttc_emb, ttc_out;
  VocabFlags ttc_vocab;
  TextTrainConfig ttc_cfg;
  bool ttc_concat = false;
  ttc->add_option("--data", ttc_data, "manifest with gold labels")->required()->check(CLI::ExistingFile);
  ttc->add_option("--embeddings", ttc_emb)->required()->check(CLI::ExistingFile);
  ttc->add_option("--out", ttc_out)->required();
  ttc_vocab.attach(ttc, false);
  ttc->add_option("--steps", ttc_cfg.steps)->capture_default_str();
  ttc->add_option("--lr", ttc_cfg.lr)->capture_default_str();
  ttc->add_option("--batch-size", ttc_cfg.batch_size)->capture_default_str();
  ttc->add_option("--hidden", ttc_cfg.hidden_dim)->capture_default_str();
  ttc->add_option("--threshold", ttc_cfg.threshold)->capture_default_str();
  ttc->add_option("--seed", ttc_cfg.seed)->capture_default_str();
  ttc->add_flag("--train-embeddings", ttc_cfg.train_embeddings);
  ttc->add_flag("--concat-captions", ttc_concat, "one example per image with its captions joined");

  // infer-labels
  auto* inf = app.add_subcommand("infer-labels", "derive image-level labels from captions");
  fs::path inf_manifest, inf_out;
  std::string inf_strategy = "exact";
  std::optional<fs::path> inf_emb, inf_clf;
  VocabFlags inf_vocab;
  inf->add_option("--manifest", inf_manifest)->required()->check(CLI::ExistingFile);
  inf->add_option("--strategy", inf_strategy, "exact|synonym|embedding|two-step|gold")->capture_default_str();
  inf->add_option("--embeddings", inf_emb)->check(CLI::ExistingFile);
  inf->add_option("--classifier", inf_clf)->check(CLI::ExistingFile);
  inf->add_option("--out", inf_out)->required();
  inf_vocab.attach(inf, true);

  // eval-labels
  auto* evl = app.add_subcommand("eval-labels", "precision and recall of inferred labels against gold");
  fs::path evl_manifest, evl_labels, evl_out;
  VocabFlags evl_vocab;
  evl->add_option("--manifest", evl_manifest)->required()->check(CLI::ExistingFile);
  evl->add_option("--labels", evl_labels)->required()->check(CLI::ExistingFile);
  evl->add_option("--out", evl_out, "report prefix")->required();
  evl_vocab.attach(evl, false);

  // train-detector
  auto* trd = app.add_subcommand("train-detector", "train the MIL detector with refinement heads");
  fs::path trd_manifest, trd_labels, trd_out;
  std::optional<fs::path> trd_val, trd_resume;
  VocabFlags trd_vocab;
  ConfigFlags trd_cfg;
  std::size_t trd_log_every = 100;
  trd->add_option("--manifest", trd_manifest)->required()->check(CLI::ExistingFile);
  trd->add_option("--labels", trd_labels)->required()->check(CLI::ExistingFile);
  trd->add_option("--out", trd_out, "checkpoint directory")->required();
  trd->add_option("--val", trd_val, "validation manifest with boxes")->check(CLI::ExistingFile);
  trd->add_option("--resume", trd_resume)->check(CLI::ExistingFile);
  trd->add_option("--log-every", trd_log_every)->capture_default_str();
  trd->add_option("--channels", channels)->capture_default_str();
  trd->add_option("--provider-seed", provider_seed)->capture_default_str();
  trd_vocab.attach(trd, false);
  trd_cfg.attach(trd);

  // detect
  auto* det = app.add_subcommand("detect", "run a trained detector");
  fs::path det_manifest, det_ckpt, det_out;
  ConfigFlags det_cfg;
  det->add_option("--manifest", det_manifest)->required()->check(CLI::ExistingFile);
  det->add_option("--checkpoint", det_ckpt)->required()->check(CLI::ExistingFile);
  det->add_option("--out", det_out, "detection TSV")->required();
  det_cfg.attach(det);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score a detection dump");
  fs::path ev_manifest, ev_dets, ev_out;
  std::string ev_protocol = "voc";
  std::optional<fs::path> ev_pr;
  bool ev_eleven = false;
  VocabFlags ev_vocab;
  ev->add_option("--manifest", ev_manifest)->required()->check(CLI::ExistingFile);
  ev->add_option("--detections", ev_dets)->required()->check(CLI::ExistingFile);
  ev->add_option("--protocol", ev_protocol, "voc|coco|corloc")->capture_default_str();
  ev->add_option("--out", ev_out, "report prefix")->required();
  ev->add_option("--pr-curves", ev_pr, "CSV of per-class PR curves");
  ev->add_flag("--eleven-point", ev_eleven, "11-point interpolated AP");
  ev_vocab.attach(ev, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto s = make_synthetic(synth_out, synth_opt, provider_from(channels, provider_seed));
      std::printf("wrote %zu train / %zu test images, %zu captions (%zu paraphrased) to %s\n", s.train_images,
                  s.test_images, s.captions, s.paraphrased_captions, synth_out.string().c_str());
    } else if (*ttc) {
      const auto vocab = ttc_vocab.load();
      const auto table = EmbeddingTable::load(ttc_emb);
      const auto data = caption_examples(load_manifest(ttc_data, {.require_proposals = false}), vocab, ttc_concat);
      const auto res = train_text_classifier(data, table, vocab.size(), ttc_cfg);
      save_text_classifier(ttc_out, res.params, vocab);
      std::printf("trained on %zu examples (%zu skipped), final batch loss %.4f\n", data.size(),
                  res.skipped_examples, res.loss_history.empty() ? 0.0 : res.loss_history.back());
    } else if (*inf) {
      const auto strategy = parse_label_strategy(inf_strategy);
      if (!strategy) throw ConfigError("unknown strategy '" + inf_strategy + "'");
      const auto vocab = inf_vocab.load();
      std::optional<EmbeddingTable> table;
      std::optional<TextClassifierParams> clf;
      if (inf_emb) table = EmbeddingTable::load(*inf_emb);
      if (inf_clf) clf = load_text_classifier(*inf_clf, vocab);
      const LabelResources res{&vocab, table ? &*table : nullptr, clf ? &*clf : nullptr};
      const auto manifest = load_manifest(inf_manifest, {.require_proposals = false});
      const auto labels = build_image_labels(manifest, *strategy, res);
      save_image_labels(inf_out, labels, vocab);
      std::printf("labelled %zu images (%zu with no labels)\n", labels.labels.size(), labels.empty_images.size());
    } else if (*evl) {
      const auto vocab = evl_vocab.load();
      const auto manifest = load_manifest(evl_manifest, {.require_proposals = false});
      const auto labels = load_image_labels(evl_labels, vocab);
      std::vector<LabelSet> pred, gold;
      for (const auto& rec : manifest.records) {
        const auto it = labels.labels.find(rec.image_id);
        if (it == labels.labels.end()) throw ConfigError("no labels for image " + rec.image_id);
        pred.push_back(it->second);
        gold.push_back(gold_label_set(rec, vocab));
      }
      const auto report = evaluate_labels(pred, gold, vocab);
      write_report(evl_out, report);
      std::cout << report_to_text(report);
    } else if (*trd) {
      const auto vocab = trd_vocab.load();
      const auto manifest = load_manifest(trd_manifest);
      const auto labels = load_image_labels(trd_labels, vocab);
      std::optional<DetectorCheckpoint> resume;
      TrainConfig base;
      if (trd_resume) {
        resume = load_checkpoint(*trd_resume);
        base = resume->config;
        channels = resume->provider_channels;
        provider_seed = resume->provider_seed;
      }
      const auto config = trd_cfg.resolve(base);
      std::optional<DatasetManifest> val;
      if (trd_val) val = load_manifest(*trd_val);
      TrainOptions opts;
      opts.output_dir = trd_out;
      opts.validation = val ? &*val : nullptr;
      opts.log = &std::cout;
      opts.log_every = trd_log_every;
      const auto res = train_detector(manifest, labels, config, vocab, provider_from(channels, provider_seed),
                                      resume ? &*resume : nullptr, opts);
      std::printf("finished at step %zu; %zu images skipped for empty labels\n", res.final.step,
                  res.skipped_images.size());
      if (res.best_map) std::printf("best validation mAP@0.5 %.4f\n", *res.best_map);
    } else if (*det) {
      const auto ckpt = load_checkpoint(det_ckpt);
      const CategoryVocabulary vocab(ckpt.classes);
      const auto config = det_cfg.resolve(ckpt.config);
      const auto manifest = load_manifest(det_manifest);
      const auto dets =
          detect(manifest, ckpt.params, config, provider_from(ckpt.provider_channels, ckpt.provider_seed));
      write_detections(det_out, dets, vocab);
      std::printf("%zu detections over %zu images\n", dets.size(), manifest.size());
    } else if (*ev) {
      const auto protocol = parse_protocol(ev_protocol);
      if (!protocol || *protocol == EvalProtocol::labelpr)
        throw ConfigError("unknown detection protocol '" + ev_protocol + "'");
      const auto vocab = ev_vocab.load();
      const auto manifest = load_manifest(ev_manifest, {.require_proposals = false});
      const auto gts = ground_truth_boxes(manifest, vocab);
      const auto dets = read_detections(ev_dets, vocab);
      ApOptions opts;
      if (ev_eleven) opts.interpolation = ApInterpolation::eleven_point;
      const auto report = evaluate_detections(dets, gts, vocab, *protocol, opts);
      write_report(ev_out, report);
      if (ev_pr) write_pr_curves(*ev_pr, dets, gts, vocab, opts);
      std::cout << report_to_text(report);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
