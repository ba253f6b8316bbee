#include "wsod/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "wsod/caption.hpp"
#include "wsod/error.hpp"
#include "wsod/image.hpp"
#include "wsod/manifest.hpp"
#include "wsod/proposal_io.hpp"

namespace wsod {

namespace fs = std::filesystem;

namespace {

struct ClassSpec {
  const char* name;
  float rgb[3];
  std::vector<const char*> paraphrases;  // never contain the class name
  std::vector<const char*> listed;       // subset of paraphrases in the synonym file
};

const std::vector<ClassSpec>& class_specs() {
  static const std::vector<ClassSpec> specs{
      {"person", {0.85f, 0.15f, 0.15f}, {"man", "woman", "boy", "girl", "lady", "guy"}, {"man", "woman"}},
      {"bicycle", {0.15f, 0.75f, 0.20f}, {"bike", "cycle", "tandem", "racer"}, {"bike"}},
      {"car", {0.15f, 0.25f, 0.85f}, {"vehicle", "sedan", "automobile", "taxi"}, {"automobile"}},
      {"dog", {0.90f, 0.85f, 0.10f}, {"puppy", "pup", "hound", "terrier"}, {"puppy"}},
      {"cat", {0.80f, 0.20f, 0.80f}, {"kitten", "kitty", "tabby"}, {"kitten"}},
      {"bus", {0.10f, 0.80f, 0.80f}, {"coach", "minibus", "shuttle"}, {"coach"}},
      {"bird", {0.95f, 0.55f, 0.10f}, {"sparrow", "pigeon", "parrot"}, {"sparrow"}},
      {"chair", {0.55f, 0.35f, 0.15f}, {"seat", "stool", "armchair"}, {"seat"}},
  };
  return specs;
}

const std::vector<const char*> kFillers{"a", "an", "the", "photo", "of", "there", "is", "are", "in", "scene",
                                        "near", "old", "wall", "picture", "showing", "on", "sunny", "day",
                                        "and", "with", "next", "to", "street", "park", "some", "view"};

std::string join_mentions(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += (i + 1 == words.size()) ? " and " : ", ";
    out += "a " + words[i];
  }
  return out;
}

std::string render_caption(std::size_t templ, const std::vector<std::string>& words) {
  const auto list = join_mentions(words);
  switch (templ % 5) {
    case 0: return "A photo of " + list + ".";
    case 1: return "There is " + list + " in the scene.";
    case 2: return list + " near the old wall.";
    case 3: return "A picture showing " + list + " on a sunny day.";
    default: return "Some view of the street with " + list + ".";
  }
}

// Typical norm of pretrained 300-d word vectors.
constexpr double kWordNorm = 6.0;

std::vector<double> random_word_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double n = 0.0;
  for (double& x : v) {
    x = normal(rng);
    n += x * x;
  }
  n = std::sqrt(n) / kWordNorm;
  for (double& x : v) x /= n;
  return v;
}

bool overlaps(const Box& a, const Box& b, double gap) {
  return a.x1 < b.x2 + gap && b.x1 < a.x2 + gap && a.y1 < b.y2 + gap && b.y1 < a.y2 + gap;
}

}  // namespace

SyntheticSummary make_synthetic(const fs::path& out_dir, const SyntheticOptions& opt,
                                const ToyFeatureProvider& provider) {
  const auto& specs = class_specs();
  if (opt.num_classes == 0 || opt.num_classes > specs.size())
    throw ConfigError("make_synthetic: num_classes must be in [1, " + std::to_string(specs.size()) + "]");
  if (opt.test_images >= opt.num_images) throw ConfigError("make_synthetic: test split must leave training images");
  if (opt.max_objects == 0 || opt.captions_per_image == 0) throw ConfigError("make_synthetic: empty images/captions");
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "proposals");
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SyntheticSummary summary;

  {
    std::ofstream classes(out_dir / "classes.txt");
    std::ofstream syn(out_dir / "synonyms.tsv");
    for (std::size_t c = 0; c < opt.num_classes; ++c) {
      classes << specs[c].name << '\n';
      for (const auto* w : specs[c].listed) syn << w << '\t' << specs[c].name << '\n';
    }
  }

  {
    // Class vectors are random; paraphrases sit near their class, fillers anywhere.
    EmbeddingTable table(opt.embedding_dim);
    std::set<std::string> seen;
    for (std::size_t c = 0; c < opt.num_classes; ++c) {
      auto base = random_word_vector(rng, opt.embedding_dim);
      table.insert(specs[c].name, base);
      seen.insert(specs[c].name);
      for (const auto* w : specs[c].paraphrases) {
        auto noise = random_word_vector(rng, opt.embedding_dim);
        std::vector<double> v(opt.embedding_dim);
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = 0.75 * base[k] + 0.66 * noise[k];
        table.insert(w, v);
      }
    }
    for (const auto* w : kFillers)
      if (!seen.count(w)) table.insert(w, random_word_vector(rng, opt.embedding_dim));
    table.save(out_dir / "embeddings.txt");
  }

  const auto boxes = grid_proposals(opt.image_size, opt.image_size, opt.grid);
  DatasetManifest train, test, textclf;
  const double S = opt.image_size;
  for (std::size_t n = 0; n < opt.num_images; ++n) {
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "img_%04zu", n);
    const std::string id = idbuf;

    const float base = static_cast<float>(0.4 + 0.2 * unif(rng));
    Image img(opt.image_size, opt.image_size);
    for (float& p : img.pixels) p = base + static_cast<float>(0.16 * (unif(rng) - 0.5));

    // Objects of distinct classes; bounding boxes close to a grid cell or 2x2 block.
    std::vector<std::size_t> classes(opt.num_classes);
    std::iota(classes.begin(), classes.end(), 0);
    std::shuffle(classes.begin(), classes.end(), rng);
    const std::size_t want =
        1 + std::uniform_int_distribution<std::size_t>(0, std::min(opt.max_objects, opt.num_classes) - 1)(rng);
    std::vector<std::pair<std::size_t, Box>> objects;
    for (std::size_t k = 0; k < want; ++k) {
      for (int attempt = 0; attempt < 100; ++attempt) {
        const int level = 2 + static_cast<int>(std::uniform_int_distribution<int>(0, 2)(rng));
        const bool block = level >= 3 && unif(rng) < 0.4;
        const int span = block ? 2 : 1;
        const int r = std::uniform_int_distribution<int>(0, level - span)(rng);
        const int c = std::uniform_int_distribution<int>(0, level - span)(rng);
        const double cell = S / level;
        Box cellbox{c * cell, r * cell, (c + span) * cell, (r + span) * cell};
        const double w = cellbox.width(), h = cellbox.height();
        Box obj{std::round(cellbox.x1 + 0.1 * w * unif(rng)), std::round(cellbox.y1 + 0.1 * h * unif(rng)),
                std::round(cellbox.x2 - 0.1 * w * unif(rng)), std::round(cellbox.y2 - 0.1 * h * unif(rng))};
        const bool clash = std::any_of(objects.begin(), objects.end(),
                                       [&](const auto& o) { return overlaps(o.second, obj, 2.0); });
        if (!clash && obj.valid()) {
          objects.emplace_back(classes[k], obj);
          break;
        }
      }
    }
    // Each object is a filled ellipse inscribed in its ground-truth box.
    for (const auto& [cls, b] : objects) {
      const double cx = (b.x1 + b.x2) / 2, cy = (b.y1 + b.y2) / 2, rx = b.width() / 2, ry = b.height() / 2;
      for (int y = static_cast<int>(b.y1); y < static_cast<int>(b.y2); ++y)
        for (int x = static_cast<int>(b.x1); x < static_cast<int>(b.x2); ++x) {
          const double u = (x + 0.5 - cx) / rx, v = (y + 0.5 - cy) / ry;
          if (u * u + v * v > 1.0) continue;
          for (int ch = 0; ch < 3; ++ch)
            img.at(x, y)[ch] = specs[cls].rgb[ch] + static_cast<float>(0.1 * (unif(rng) - 0.5));
        }
    }

    ManifestRecord rec;
    rec.image_id = id;
    rec.image = out_dir / "images" / (id + ".ppm");
    rec.width = rec.height = opt.image_size;
    rec.proposals = out_dir / "proposals" / (id + ".bin");
    std::vector<std::string> gold;
    for (const auto& [cls, b] : objects) {
      gold.push_back(specs[cls].name);
      rec.gt_boxes.push_back({specs[cls].name, b});
    }
    std::sort(gold.begin(), gold.end());
    gold.erase(std::unique(gold.begin(), gold.end()), gold.end());
    rec.gold_labels = gold;

    for (std::size_t k = 0; k < opt.captions_per_image; ++k) {
      std::vector<std::size_t> mentioned;
      for (const auto& [cls, _] : objects)
        if (unif(rng) < 0.9) mentioned.push_back(cls);
      if (mentioned.empty()) mentioned.push_back(objects[std::uniform_int_distribution<std::size_t>(0, objects.size() - 1)(rng)].first);
      const bool para = unif(rng) < opt.paraphrase_rate;
      std::vector<std::string> words;
      for (const auto cls : mentioned) {
        if (para) {
          const auto& p = specs[cls].paraphrases;
          words.push_back(p[std::uniform_int_distribution<std::size_t>(0, p.size() - 1)(rng)]);
        } else {
          words.push_back(specs[cls].name);
        }
      }
      const auto templ = std::uniform_int_distribution<std::size_t>(0, 4)(rng);
      rec.captions.push_back(render_caption(templ, words));
      ++summary.captions;
      if (para) ++summary.paraphrased_captions;
    }

    write_ppm(img, *rec.image);
    ProposalSet ps;
    ps.image_id = id;
    ps.boxes = boxes;
    // Features are extracted from the quantized image actually stored on disk.
    ps.features = provider.extract(read_ppm(*rec.image), ps.boxes);
    write_proposal_file(*rec.proposals, ps);

    const bool is_test = n >= opt.num_images - opt.test_images;
    if (is_test) {
      test.records.push_back(rec);
      ++summary.test_images;
    } else {
      if (unif(rng) < opt.labeled_fraction) textclf.records.push_back(rec);
      train.records.push_back(std::move(rec));
      ++summary.train_images;
    }
  }
  save_manifest(out_dir / "train.jsonl", train);
  save_manifest(out_dir / "test.jsonl", test);
  save_manifest(out_dir / "textclf.jsonl", textclf);
  return summary;
}

}  // namespace wsod
