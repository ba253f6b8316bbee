#include "wsod/labels.hpp"

#include <fstream>

#include <json.hpp>

#include "wsod/error.hpp"

namespace wsod {

std::optional<LabelStrategy> parse_label_strategy(std::string_view name) {
  if (name == "exact") return LabelStrategy::exact;
  if (name == "synonym") return LabelStrategy::synonym;
  if (name == "embedding") return LabelStrategy::embedding;
  if (name == "two-step" || name == "two_step") return LabelStrategy::two_step;
  if (name == "gold") return LabelStrategy::gold;
  return std::nullopt;
}

std::string_view to_string(LabelStrategy s) {
  switch (s) {
    case LabelStrategy::exact: return "exact";
    case LabelStrategy::synonym: return "synonym";
    case LabelStrategy::embedding: return "embedding";
    case LabelStrategy::two_step: return "two-step";
    case LabelStrategy::gold: return "gold";
  }
  return "unknown";
}

LabelSet infer_caption_labels(const TokenizedCaption& caption, LabelStrategy strategy,
                              const LabelResources& res) {
  if (!res.vocab) throw ConfigError("label inference needs a class vocabulary");
  switch (strategy) {
    case LabelStrategy::exact:
      return exact_match(caption, *res.vocab);
    case LabelStrategy::synonym: {
      auto exact = exact_match(caption, *res.vocab);
      return exact.empty() ? synonym_match(caption, *res.vocab) : exact;
    }
    case LabelStrategy::embedding: {
      if (!res.embeddings) throw ConfigError("embedding strategy needs an embedding table");
      auto exact = exact_match(caption, *res.vocab);
      return exact.empty() ? embedding_pseudo_label(caption, *res.embeddings, *res.vocab) : exact;
    }
    case LabelStrategy::two_step:
      if (!res.embeddings || !res.classifier)
        throw ConfigError("two-step strategy needs embeddings and a text classifier");
      return two_step_infer(caption, *res.vocab, *res.classifier, *res.embeddings);
    case LabelStrategy::gold:
      break;
  }
  throw ConfigError("gold labels come from the manifest, not from captions");
}

std::vector<LabeledCaptionExample> caption_examples(const DatasetManifest& manifest, const CategoryVocabulary& vocab,
                                                    bool concatenate) {
  std::vector<LabeledCaptionExample> out;
  for (const auto& rec : manifest.records) {
    if (!rec.gold_labels && rec.gt_boxes.empty()) continue;
    const auto gold = gold_label_set(rec, vocab);
    if (!concatenate) {
      for (const auto& c : rec.captions) out.push_back({tokenize(c), gold});
      continue;
    }
    if (rec.captions.empty()) continue;
    std::string joined;
    for (const auto& c : rec.captions) joined += (joined.empty() ? "" : " ") + c;
    out.push_back({tokenize(joined), gold});
  }
  return out;
}

ImageLabels build_image_labels(const DatasetManifest& manifest, LabelStrategy strategy,
                               const LabelResources& res) {
  if (!res.vocab) throw ConfigError("label inference needs a class vocabulary");
  ImageLabels out;
  for (const auto& rec : manifest.records) {
    LabelSet set;
    if (strategy == LabelStrategy::gold) {
      set = gold_label_set(rec, *res.vocab);
    } else {
      // The image takes the weakest provenance among captions that contributed.
      set.provenance = Provenance::exact;
      for (const auto& cap : rec.captions) {
        const auto l = infer_caption_labels(tokenize(cap), strategy, res);
        if (l.empty()) continue;
        set.present.insert(l.present.begin(), l.present.end());
        if (static_cast<int>(l.provenance) > static_cast<int>(set.provenance)) set.provenance = l.provenance;
      }
    }
    if (set.empty()) out.empty_images.push_back(rec.image_id);
    out.labels[rec.image_id] = std::move(set);
  }
  return out;
}

void save_image_labels(const std::filesystem::path& path, const ImageLabels& labels,
                       const CategoryVocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& [id, set] : labels.labels) {
    std::vector<std::string> names;
    for (const int c : set.present) names.push_back(vocab.name(c));
    out << nlohmann::json{{"image_id", id}, {"labels", names}, {"provenance", to_string(set.provenance)}}.dump()
        << '\n';
  }
}

ImageLabels load_image_labels(const std::filesystem::path& path, const CategoryVocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open label file " + path.string());
  ImageLabels out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LabelSet set;
      const auto prov = j.value("provenance", "gold");
      for (auto p : {Provenance::exact, Provenance::synonym, Provenance::embedding, Provenance::classifier,
                     Provenance::gold})
        if (to_string(p) == prov) set.provenance = p;
      for (const auto& name : j.at("labels").get<std::vector<std::string>>()) {
        const auto idx = vocab.index_of(name);
        if (!idx) throw ParseError("unknown class '" + name + "'");
        set.present.insert(*idx);
      }
      const auto id = j.at("image_id").get<std::string>();
      if (set.empty()) out.empty_images.push_back(id);
      out.labels[id] = std::move(set);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return out;
}

}  // namespace wsod
