#include "wsod/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "json_io.hpp"
#include "wsod/adagrad.hpp"
#include "wsod/error.hpp"
#include "wsod/image.hpp"
#include "wsod/proposal_io.hpp"

namespace wsod {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kInitSalt = 0x1d1d1d1dULL;

json params_to_json(const DetectorParams& p) {
  json heads = json::array();
  for (const auto& h : p.refine.heads) heads.push_back(detail::to_json(h));
  return {{"mil_cls", detail::to_json(p.mil.cls)},
          {"mil_det", detail::to_json(p.mil.det)},
          {"refine", heads},
          {"oicr_iou", p.refine.iou_threshold}};
}

DetectorParams params_from_json(const json& j) {
  DetectorParams p;
  p.mil.cls = detail::affine_from_json(j.at("mil_cls"));
  p.mil.det = detail::affine_from_json(j.at("mil_det"));
  for (const auto& h : j.at("refine")) p.refine.heads.push_back(detail::affine_from_json(h));
  p.refine.iou_threshold = j.at("oicr_iou").get<double>();
  return p;
}

}  // namespace

void save_checkpoint(const fs::path& path, const DetectorCheckpoint& c) {
  json j{{"format", "wsod.detector"},
         {"version", 1},
         {"step", c.step},
         {"classes", c.classes},
         {"config", c.config.to_map()},
         {"provider", {{"channels", c.provider_channels}, {"seed", c.provider_seed}}},
         {"params", params_to_json(c.params)},
         {"accumulators", params_to_json(c.accumulators)}};
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write " + tmp.string());
    out << j.dump() << '\n';
  }
  fs::rename(tmp, path);
}

DetectorCheckpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "wsod.detector") throw ParseError(path.string() + ": not a detector checkpoint");
  DetectorCheckpoint c;
  c.step = j.at("step").get<std::size_t>();
  c.classes = j.at("classes").get<std::vector<std::string>>();
  for (const auto& [k, v] : j.at("config").items()) c.config.set(k, v.get<std::string>());
  c.provider_channels = j.at("provider").at("channels").get<std::size_t>();
  c.provider_seed = j.at("provider").at("seed").get<std::uint64_t>();
  c.params = params_from_json(j.at("params"));
  c.accumulators = params_from_json(j.at("accumulators"));
  return c;
}

struct FeatureCache::Impl {
  const ToyFeatureProvider& provider;
  int base_scale;
  std::size_t max_proposals;
  std::vector<std::optional<ProposalSet>> stored;  // per record, as read from disk
  std::vector<std::optional<Image>> images;
  std::map<std::tuple<std::size_t, int, bool>, ProposalSet> cache;
};

FeatureCache::FeatureCache(const DatasetManifest& manifest, const ToyFeatureProvider& provider, int base_scale,
                           std::size_t max_proposals)
    : manifest_(manifest),
      impl_(new Impl{provider, base_scale, max_proposals, std::vector<std::optional<ProposalSet>>(manifest.size()),
                     std::vector<std::optional<Image>>(manifest.size()), {}}) {}

FeatureCache::~FeatureCache() = default;

const ProposalSet& FeatureCache::get(std::size_t record, int scale, bool flip) {
  const auto& rec = manifest_.records.at(record);
  if (!rec.image) scale = impl_->base_scale;  // stored features have a single scale
  const auto key = std::make_tuple(record, scale, flip);
  if (const auto it = impl_->cache.find(key); it != impl_->cache.end()) return it->second;

  auto& stored = impl_->stored[record];
  if (!stored) {
    if (!rec.proposals) throw MissingProposalFile("image " + rec.image_id + " has no proposal file");
    stored = read_proposal_file(*rec.proposals, rec.image_id);
    if (stored->boxes.size() > impl_->max_proposals) {
      stored->boxes.resize(impl_->max_proposals);
      stored->features.data.resize(impl_->max_proposals * stored->features.cols);
      stored->features.rows = impl_->max_proposals;
    }
  }
  ProposalSet out;
  out.image_id = rec.image_id;
  out.boxes = stored->boxes;
  if (flip && rec.width > 0)
    for (auto& b : out.boxes) b = flip_horizontal(b, rec.width);

  if (rec.image) {
    auto& img = impl_->images[record];
    if (!img) img = read_ppm(*rec.image);
    const double factor = static_cast<double>(scale) / impl_->base_scale;
    out.features = impl_->provider.extract_scaled(flip ? flip_horizontal(*img) : *img, out.boxes, factor);
  } else {
    out.features = stored->features;
  }
  out.validate(impl_->max_proposals);
  return impl_->cache.emplace(key, std::move(out)).first->second;
}

namespace {

std::vector<Detection> detect_impl(FeatureCache& cache, const DetectorParams& params, const TrainConfig& config) {
  const auto& manifest = cache.manifest();
  const std::size_t C = params.num_classes();
  // Feature extraction is serial (the cache is not thread-safe); scoring runs per image in parallel.
  std::vector<std::vector<const ProposalSet*>> sets(manifest.size());
  for (std::size_t r = 0; r < manifest.size(); ++r)
    for (const int s : config.scales) sets[r].push_back(&cache.get(r, s, false));

  std::vector<std::vector<Detection>> per_image(manifest.size());
  const auto n = static_cast<std::ptrdiff_t>(manifest.size());
  std::vector<std::string> errors(manifest.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ri = 0; ri < n; ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    try {
      std::vector<Matrix> scores;
      for (const auto* p : sets[r]) {
        const auto mil = mil_forward(*p, params.mil);
        scores.push_back(inference_scores(*p, mil, params.refine, config.aggregation));
      }
      const auto avg = average_multiscale(scores);
      // Scale-invariant proposal identity: boxes come from the unscaled record.
      const auto& boxes = sets[r].front()->boxes;
      std::vector<Detection> dets;
      for (std::size_t c = 0; c < C; ++c) {
        std::vector<Detection> cls_dets;
        for (std::size_t i = 0; i < boxes.size(); ++i)
          if (avg(i, c) > config.score_floor)
            cls_dets.push_back({manifest.records[r].image_id, boxes[i], static_cast<int>(c), avg(i, c)});
        auto kept = nms(cls_dets, config.nms_iou);
        dets.insert(dets.end(), kept.begin(), kept.end());
      }
      per_image[r] = std::move(dets);
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw NonFiniteScore(e);
  std::vector<Detection> out;
  for (auto& v : per_image) out.insert(out.end(), v.begin(), v.end());
  return out;
}

}  // namespace

std::vector<Detection> detect(const DatasetManifest& manifest, const DetectorParams& params,
                              const TrainConfig& config, const ToyFeatureProvider& provider) {
  FeatureCache cache(manifest, provider, config.base_scale, config.max_proposals);
  return detect_impl(cache, params, config);
}

TrainResult train_detector(const DatasetManifest& manifest, const ImageLabels& labels, const TrainConfig& config,
                           const CategoryVocabulary& vocab, const ToyFeatureProvider& provider,
                           const DetectorCheckpoint* resume, const TrainOptions& options) {
  config.validate();
  TrainResult result;

  std::vector<std::size_t> trainable;
  std::vector<LabelSet> record_labels(manifest.size());
  for (std::size_t r = 0; r < manifest.size(); ++r) {
    const auto& id = manifest.records[r].image_id;
    const auto it = labels.labels.find(id);
    if (it == labels.labels.end() || it->second.empty()) {
      result.skipped_images.push_back(id);
      continue;
    }
    record_labels[r] = it->second;
    trainable.push_back(r);
  }
  if (trainable.empty()) throw ConfigError("train_detector: no image has a nonempty label set");

  FeatureCache cache(manifest, provider, config.base_scale, config.max_proposals);
  const std::size_t d = cache.get(trainable.front(), config.base_scale, false).features.cols;
  const std::size_t C = vocab.size();

  DetectorCheckpoint ckpt;
  if (resume) {
    ckpt = *resume;
    if (ckpt.params.feature_dim() != d || ckpt.params.num_classes() != C ||
        ckpt.params.refine.size() != config.refinements)
      throw ConfigError("resume checkpoint does not match the data or config");
    if (ckpt.classes != vocab.classes()) throw ConfigError("resume checkpoint uses a different class list");
  } else {
    ckpt.params = DetectorParams(d, C, config.refinements, config.oicr_iou);
    ckpt.params.init(mix_seed(config.seed, kInitSalt));
    ckpt.accumulators = ckpt.params.zeros_like();
    ckpt.accumulators.for_each_array([](std::span<double> a) { std::fill(a.begin(), a.end(), 0.1); });
    ckpt.classes = vocab.classes();
  }
  ckpt.params.refine.iou_threshold = config.oicr_iou;
  ckpt.config = config;
  ckpt.provider_channels = provider.channels();
  ckpt.provider_seed = provider.seed();

  const Adagrad opt{config.lr};
  auto write = [&](const DetectorCheckpoint& c, const std::string& name) {
    if (!options.output_dir) return;
    fs::create_directories(*options.output_dir);
    save_checkpoint(*options.output_dir / name, c);
  };

  std::unique_ptr<FeatureCache> val_cache;
  if (options.validation)
    val_cache = std::make_unique<FeatureCache>(*options.validation, provider, config.base_scale, config.max_proposals);
  std::vector<GroundTruthBox> val_gt;
  if (options.validation) val_gt = ground_truth_boxes(*options.validation, vocab);

  for (std::size_t step = ckpt.step; step < config.steps; ++step) {
    std::mt19937_64 rng(mix_seed(config.seed, step));
    std::uniform_int_distribution<std::size_t> pick(0, trainable.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_scale(0, config.scales.size() - 1);
    std::bernoulli_distribution coin(0.5);

    std::vector<std::size_t> batch;
    std::vector<const ProposalSet*> inputs;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const auto r = trainable[pick(rng)];
      const int scale = config.scales[pick_scale(rng)];
      const bool flip = config.flip && coin(rng);
      batch.push_back(r);
      inputs.push_back(&cache.get(r, scale, flip));
    }

    std::vector<DetectorParams> grads(batch.size(), ckpt.params.zeros_like());
    std::vector<LossBreakdown> losses(batch.size());
    std::vector<std::string> errors(batch.size());
    const auto nb = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t bi = 0; bi < nb; ++bi) {
      const auto b = static_cast<std::size_t>(bi);
      try {
        losses[b] = detector_objective(*inputs[b], record_labels[batch[b]], ckpt.params, &grads[b]);
      } catch (const std::exception& e) {
        errors[b] = e.what();
      }
    }

    LossBreakdown mean;
    mean.refinement.assign(config.refinements, 0.0);
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& id = manifest.records[batch[b]].image_id;
      if (!errors[b].empty() || !std::isfinite(losses[b].total))
        throw NonFiniteScore("step " + std::to_string(step) + ", image " + id + ": " +
                             (errors[b].empty() ? "non-finite loss" : errors[b]));
      mean.mid += losses[b].mid * inv;
      for (std::size_t k = 0; k < config.refinements; ++k) mean.refinement[k] += losses[b].refinement[k] * inv;
      mean.total += losses[b].total * inv;
      ++result.gradient_contributions[id];
    }

    // Sum per-image gradients in batch order, then average.
    auto total = ckpt.params.zeros_like();
    std::vector<std::span<double>> tsp;
    total.for_each_array([&](std::span<double> a) { tsp.push_back(a); });
    for (auto& g : grads) {
      std::size_t k = 0;
      g.for_each_array([&](std::span<double> a) {
        for (std::size_t i = 0; i < a.size(); ++i) tsp[k][i] += a[i];
        ++k;
      });
    }
    std::vector<std::span<double>> psp, asp;
    ckpt.params.for_each_array([&](std::span<double> a) { psp.push_back(a); });
    ckpt.accumulators.for_each_array([&](std::span<double> a) { asp.push_back(a); });
    for (std::size_t k = 0; k < tsp.size(); ++k) {
      for (double& v : tsp[k]) v *= inv;
      opt.step(psp[k], tsp[k], asp[k]);
    }
    for (const auto& s : psp)
      if (!all_finite(s)) throw NonFiniteScore("step " + std::to_string(step) + ": parameters became non-finite");

    ckpt.step = step + 1;
    result.history.push_back(mean);
    if (options.log && options.log_every && (ckpt.step % options.log_every == 0 || ckpt.step == config.steps)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "step %zu  loss %.5f  mid %.5f", ckpt.step, mean.total, mean.mid);
      *options.log << buf << '\n';
    }
    if (config.checkpoint_interval && ckpt.step % config.checkpoint_interval == 0)
      write(ckpt, "step_" + std::to_string(ckpt.step) + ".json");
    if (val_cache && config.eval_interval && ckpt.step % config.eval_interval == 0) {
      const auto dets = detect_impl(*val_cache, ckpt.params, config);
      const auto map = mean_average_precision(dets, val_gt, C).mean;
      if (map && (!result.best_map || *map > *result.best_map)) {
        result.best_map = map;
        result.best = ckpt;
        write(ckpt, "best.json");
      }
      if (options.log) *options.log << "step " << ckpt.step << "  val mAP@0.5 " << map.value_or(-1.0) << '\n';
    }
  }
  result.final = ckpt;
  write(ckpt, "final.json");
  return result;
}

std::string format_detection(const Detection& d, const CategoryVocabulary& vocab) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "\t%.6f\t%.2f\t%.2f\t%.2f\t%.2f", d.score, d.box.x1, d.box.y1, d.box.x2, d.box.y2);
  return d.image_id + "\t" + vocab.name(d.cls) + buf;
}

void write_detections(const fs::path& path, const std::vector<Detection>& dets, const CategoryVocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& d : dets) out << format_detection(d, vocab) << '\n';
}

std::vector<Detection> read_detections(const fs::path& path, const CategoryVocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open detection dump " + path.string());
  std::vector<Detection> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 7) throw ParseError("detection dump: expected 7 tab-separated fields", lineno);
    const auto cls = vocab.index_of(fields[1]);
    if (!cls) throw ParseError("detection dump: unknown class '" + fields[1] + "'", lineno);
    try {
      out.push_back({fields[0], {std::stod(fields[3]), std::stod(fields[4]), std::stod(fields[5]), std::stod(fields[6])},
                     *cls, std::stod(fields[2])});
    } catch (const std::logic_error&) {
      throw ParseError("detection dump: malformed number", lineno);
    }
  }
  return out;
}

}  // namespace wsod
