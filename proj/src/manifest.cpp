#include "wsod/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wsod/error.hpp"

namespace wsod {

namespace fs = std::filesystem;
using nlohmann::json;

const ManifestRecord* DatasetManifest::find(const std::string& image_id) const {
  for (const auto& r : records)
    if (r.image_id == image_id) return &r;
  return nullptr;
}

namespace {

ManifestRecord parse_record(const json& j, const fs::path& base, const ManifestOptions& options) {
  if (!j.is_object()) throw ParseError("record is not a JSON object");
  ManifestRecord r;
  if (!j.contains("image_id") || !j["image_id"].is_string()) throw ParseError("missing string field image_id");
  r.image_id = j["image_id"].get<std::string>();
  if (r.image_id.empty()) throw ParseError("empty image_id");
  if (j.contains("image")) {
    r.image = base / j["image"].get<std::string>();
    r.width = j.at("width").get<int>();
    r.height = j.at("height").get<int>();
    if (r.width <= 0 || r.height <= 0) throw ParseError("width and height must be positive");
  } else {
    r.width = j.value("width", 0);
    r.height = j.value("height", 0);
  }
  if (j.contains("captions")) r.captions = j["captions"].get<std::vector<std::string>>();
  if (j.contains("gold_labels")) r.gold_labels = j["gold_labels"].get<std::vector<std::string>>();
  if (r.captions.empty() && !r.gold_labels) throw ParseError("record has neither captions nor gold_labels");
  if (j.contains("proposals")) r.proposals = base / j["proposals"].get<std::string>();
  else if (options.require_proposals) throw ParseError("missing field proposals");
  if (j.contains("gt_boxes")) {
    for (const auto& g : j["gt_boxes"]) {
      const auto coords = g.at("box").get<std::vector<double>>();
      if (coords.size() != 4) throw ParseError("gt box needs 4 coordinates");
      GroundTruthEntry e{g.at("class").get<std::string>(), {coords[0], coords[1], coords[2], coords[3]}};
      if (!e.box.valid()) throw ParseError("degenerate gt box");
      r.gt_boxes.push_back(std::move(e));
    }
  }
  return r;
}

std::string relative_to(const fs::path& p, const fs::path& base) {
  if (base.empty()) return p.generic_string();
  const auto rel = p.lexically_relative(base);
  return rel.empty() ? p.generic_string() : rel.generic_string();
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path, const ManifestOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  DatasetManifest m;
  std::vector<std::string> problems;
  std::size_t first_bad_line = 0;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto rec = parse_record(json::parse(line), base, options);
      if (!ids.insert(rec.image_id).second) throw ParseError("duplicate image_id " + rec.image_id);
      m.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      if (!first_bad_line) first_bad_line = lineno;
      problems.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = path.string() + ": " + std::to_string(problems.size()) + " malformed record(s)";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ParseError(msg, first_bad_line);
  }
  std::vector<std::string> missing;
  for (const auto& r : m.records)
    if (r.proposals && !fs::exists(*r.proposals)) missing.push_back(r.image_id + " -> " + r.proposals->string());
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " proposal file(s) not found";
    for (const auto& s : missing) msg += "\n  " + s;
    throw MissingProposalFile(msg);
  }
  return m;
}

void save_manifest(const fs::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  const auto base = path.parent_path();
  for (const auto& r : manifest.records) {
    json j;
    j["image_id"] = r.image_id;
    if (r.image) j["image"] = relative_to(*r.image, base);
    if (r.width > 0) {
      j["width"] = r.width;
      j["height"] = r.height;
    }
    j["captions"] = r.captions;
    if (r.gold_labels) j["gold_labels"] = *r.gold_labels;
    if (r.proposals) j["proposals"] = relative_to(*r.proposals, base);
    if (!r.gt_boxes.empty()) {
      auto& boxes = j["gt_boxes"] = json::array();
      for (const auto& g : r.gt_boxes)
        boxes.push_back({{"class", g.class_name}, {"box", {g.box.x1, g.box.y1, g.box.x2, g.box.y2}}});
    }
    out << j.dump() << '\n';
  }
}

LabelSet gold_label_set(const ManifestRecord& record, const CategoryVocabulary& vocab) {
  LabelSet out{{}, Provenance::gold};
  auto add = [&](const std::string& name) {
    const auto idx = vocab.index_of(name);
    if (!idx) throw ConfigError("image " + record.image_id + ": unknown class '" + name + "'");
    out.present.insert(*idx);
  };
  if (record.gold_labels) {
    for (const auto& name : *record.gold_labels) add(name);
  } else {
    for (const auto& g : record.gt_boxes) add(g.class_name);
  }
  return out;
}

std::vector<GroundTruthBox> ground_truth_boxes(const DatasetManifest& manifest, const CategoryVocabulary& vocab) {
  std::vector<GroundTruthBox> out;
  for (const auto& r : manifest.records)
    for (const auto& g : r.gt_boxes) {
      const auto idx = vocab.index_of(g.class_name);
      if (!idx) throw ConfigError("image " + r.image_id + ": unknown class '" + g.class_name + "'");
      out.push_back({r.image_id, g.box, *idx});
    }
  return out;
}

}  // namespace wsod
