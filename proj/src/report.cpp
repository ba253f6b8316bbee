#include "wsod/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "wsod/error.hpp"

namespace wsod {

using nlohmann::json;

std::optional<EvalProtocol> parse_protocol(std::string_view name) {
  if (name == "voc") return EvalProtocol::voc;
  if (name == "coco") return EvalProtocol::coco;
  if (name == "corloc") return EvalProtocol::corloc;
  if (name == "labelpr") return EvalProtocol::labelpr;
  return std::nullopt;
}

namespace {

std::string_view protocol_name(EvalProtocol p) {
  switch (p) {
    case EvalProtocol::voc: return "voc";
    case EvalProtocol::coco: return "coco";
    case EvalProtocol::corloc: return "corloc";
    case EvalProtocol::labelpr: return "labelpr";
  }
  return "unknown";
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string pct(const std::optional<double>& v) {
  if (!v) return "   n/a";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * *v);
  return buf;
}

}  // namespace

EvalReport evaluate_detections(const std::vector<Detection>& dets, const std::vector<GroundTruthBox>& gts,
                               const CategoryVocabulary& vocab, EvalProtocol protocol,
                               const ApOptions& voc_options) {
  EvalReport r;
  r.protocol = protocol;
  r.classes = vocab.classes();
  switch (protocol) {
    case EvalProtocol::voc:
      r.voc = mean_average_precision(dets, gts, vocab.size(), voc_options);
      break;
    case EvalProtocol::coco:
      r.coco = coco_ap_sweep(dets, gts, vocab.size());
      break;
    case EvalProtocol::corloc: {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t c = 0; c < vocab.size(); ++c) {
        const auto v = corloc(dets, gts, static_cast<int>(c));
        if (v) {
          sum += *v;
          ++n;
        }
        r.corloc.push_back(v);
      }
      if (n) r.mean_corloc = sum / static_cast<double>(n);
      break;
    }
    case EvalProtocol::labelpr:
      throw ConfigError("labelpr evaluates label sets, not detections");
  }
  return r;
}

EvalReport evaluate_labels(const std::vector<LabelSet>& predicted, const std::vector<LabelSet>& gold,
                           const CategoryVocabulary& vocab) {
  EvalReport r;
  r.protocol = EvalProtocol::labelpr;
  r.classes = vocab.classes();
  r.label_pr = eval_label_pr(predicted, gold, vocab.size());
  return r;
}

json report_to_json(const EvalReport& r) {
  json j{{"protocol", protocol_name(r.protocol)}, {"classes", r.classes}};
  if (r.voc) {
    json per = json::array();
    for (const auto& v : r.voc->per_class) per.push_back(opt(v));
    j["ap50"] = {{"per_class", per}, {"mean", opt(r.voc->mean)}};
  }
  if (r.coco) {
    j["coco"] = {{"ap", opt(r.coco->ap)},         {"ap50", opt(r.coco->ap50)},
                 {"ap75", opt(r.coco->ap75)},     {"ap_small", opt(r.coco->ap_small)},
                 {"ap_medium", opt(r.coco->ap_medium)}, {"ap_large", opt(r.coco->ap_large)}};
  }
  if (r.protocol == EvalProtocol::corloc) {
    json per = json::array();
    for (const auto& v : r.corloc) per.push_back(opt(v));
    j["corloc"] = {{"per_class", per}, {"mean", opt(r.mean_corloc)}};
  }
  if (r.label_pr) {
    json per = json::array();
    for (const auto& c : r.label_pr->per_class)
      per.push_back({{"tp", c.true_positives},
                     {"fp", c.false_positives},
                     {"fn", c.false_negatives},
                     {"precision", opt(c.precision)},
                     {"recall", opt(c.recall)}});
    j["label_pr"] = {{"precision", opt(r.label_pr->precision)}, {"recall", opt(r.label_pr->recall)}, {"per_class", per}};
  }
  return j;
}

std::string report_to_text(const EvalReport& r) {
  std::ostringstream out;
  char buf[128];
  auto row = [&](const std::string& name, const std::string& a, const std::string& b = {}) {
    std::snprintf(buf, sizeof buf, "%-20s %8s %8s\n", name.c_str(), a.c_str(), b.c_str());
    out << buf;
  };
  if (r.voc) {
    out << "Average precision (%), IoU >= 0.5\n";
    for (std::size_t c = 0; c < r.classes.size(); ++c) row(r.classes[c], pct(r.voc->per_class[c]));
    row("mean", pct(r.voc->mean));
  }
  if (r.coco) {
    out << "Average precision (%), COCO-style\n";
    row("IoU 0.50:0.95", pct(r.coco->ap));
    row("IoU 0.50", pct(r.coco->ap50));
    row("IoU 0.75", pct(r.coco->ap75));
    row("area S", pct(r.coco->ap_small));
    row("area M", pct(r.coco->ap_medium));
    row("area L", pct(r.coco->ap_large));
  }
  if (r.protocol == EvalProtocol::corloc) {
    out << "CorLoc (%)\n";
    for (std::size_t c = 0; c < r.classes.size(); ++c) row(r.classes[c], pct(r.corloc[c]));
    row("mean", pct(r.mean_corloc));
  }
  if (r.label_pr) {
    out << "Label precision / recall (%)\n";
    row("class", "P", "R");
    for (std::size_t c = 0; c < r.classes.size(); ++c)
      row(r.classes[c], pct(r.label_pr->per_class[c].precision), pct(r.label_pr->per_class[c].recall));
    row("micro", pct(r.label_pr->precision), pct(r.label_pr->recall));
  }
  return out.str();
}

void write_report(const std::filesystem::path& prefix, const EvalReport& report) {
  std::ofstream js(prefix.string() + ".json");
  std::ofstream txt(prefix.string() + ".txt");
  if (!js || !txt) throw Error("cannot write report " + prefix.string());
  js << report_to_json(report).dump(2) << '\n';
  txt << report_to_text(report);
}

void write_pr_curves(const std::filesystem::path& path, const std::vector<Detection>& dets,
                     const std::vector<GroundTruthBox>& gts, const CategoryVocabulary& vocab,
                     const ApOptions& options) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "class,rank,recall,precision\n";
  char buf[64];
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    const auto curve = precision_recall_curve(dets, gts, static_cast<int>(c), options);
    if (!curve) continue;
    for (std::size_t k = 0; k < curve->recall.size(); ++k) {
      std::snprintf(buf, sizeof buf, ",%zu,%.6f,%.6f\n", k + 1, curve->recall[k], curve->precision[k]);
      out << vocab.name(static_cast<int>(c)) << buf;
    }
  }
}

}  // namespace wsod
