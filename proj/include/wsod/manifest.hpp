#pragma once

// Line-delimited JSON dataset manifest. One object per line:
//
//   {"image_id": "img_0001",            required, unique
//    "image": "images/img_0001.ppm",    optional; enables re-extraction at other scales
//    "width": 96, "height": 96,         required with "image"
//    "captions": ["a dog ..."],         may be empty only when gold_labels is present
//    "gold_labels": ["dog"],            optional
//    "proposals": "proposals/img_0001.bin",
//    "gt_boxes": [{"class": "dog", "box": [x1, y1, x2, y2]}]}   optional
//
// Relative paths are resolved against the manifest's directory.

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "wsod/box.hpp"
#include "wsod/caption.hpp"
#include "wsod/eval.hpp"

namespace wsod {

struct GroundTruthEntry {
  std::string class_name;
  Box box;
};

struct ManifestRecord {
  std::string image_id;
  std::optional<std::filesystem::path> image;
  int width = 0;
  int height = 0;
  std::vector<std::string> captions;
  std::optional<std::vector<std::string>> gold_labels;
  std::optional<std::filesystem::path> proposals;
  std::vector<GroundTruthEntry> gt_boxes;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;

  std::size_t size() const { return records.size(); }
  const ManifestRecord* find(const std::string& image_id) const;
};

struct ManifestOptions {
  bool require_proposals = true;  // caption-only corpora set this to false
};

// Collects every problem before throwing: ParseError lists malformed records
// with their line numbers, MissingProposalFile lists unresolvable proposal refs.
DatasetManifest load_manifest(const std::filesystem::path& path, const ManifestOptions& options = {});

// Paths are written relative to the manifest's directory when possible.
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Gold labels of a record: gold_labels when present, else the classes of its gt_boxes.
LabelSet gold_label_set(const ManifestRecord& record, const CategoryVocabulary& vocab);

std::vector<GroundTruthBox> ground_truth_boxes(const DatasetManifest& manifest, const CategoryVocabulary& vocab);

}  // namespace wsod
