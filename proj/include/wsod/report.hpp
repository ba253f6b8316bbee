#pragma once

// Evaluation reports in machine-readable (JSON) and human-readable (text) form.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsod/caption.hpp"
#include "wsod/eval.hpp"
#include "wsod/textclf.hpp"

namespace wsod {

enum class EvalProtocol { voc, coco, corloc, labelpr };

std::optional<EvalProtocol> parse_protocol(std::string_view name);

struct EvalReport {
  EvalProtocol protocol = EvalProtocol::voc;
  std::vector<std::string> classes;
  std::optional<MeanAp> voc;
  std::optional<CocoSummary> coco;
  std::vector<std::optional<double>> corloc;  // per class
  std::optional<double> mean_corloc;
  std::optional<LabelPR> label_pr;
};

// voc, coco or corloc over a detection dump.
EvalReport evaluate_detections(const std::vector<Detection>& dets, const std::vector<GroundTruthBox>& gts,
                               const CategoryVocabulary& vocab, EvalProtocol protocol,
                               const ApOptions& voc_options = {});

EvalReport evaluate_labels(const std::vector<LabelSet>& predicted, const std::vector<LabelSet>& gold,
                           const CategoryVocabulary& vocab);

nlohmann::json report_to_json(const EvalReport& report);
std::string report_to_text(const EvalReport& report);

// Writes <prefix>.json and <prefix>.txt.
void write_report(const std::filesystem::path& prefix, const EvalReport& report);

// CSV rows "class,rank,recall,precision" for plotting PR curves.
void write_pr_curves(const std::filesystem::path& path, const std::vector<Detection>& dets,
                     const std::vector<GroundTruthBox>& gts, const CategoryVocabulary& vocab,
                     const ApOptions& options = {});

}  // namespace wsod
