#include "wsod/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "wsod/error.hpp"

namespace wsod {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("invalid value for " + key + ": '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "no") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + value + "'");
}

// Shortest text that reads back to the same double.
std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
  if (!(lr > 0)) fail("lr must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(nms_iou > 0 && nms_iou <= 1)) fail("nms_iou must lie in (0, 1]");
  if (!(oicr_iou > 0 && oicr_iou <= 1)) fail("oicr_iou must lie in (0, 1]");
  if (scales.empty()) fail("scales must be nonempty");
  for (const int s : scales)
    if (s <= 0) fail("scales must be positive");
  if (base_scale <= 0) fail("base_scale must be positive");
  if (max_proposals == 0) fail("max_proposals must be positive");
  if (steps == 0) fail("steps must be positive");
  if (!(score_floor >= 0 && score_floor < 1)) fail("score_floor must lie in [0, 1)");
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  std::string sc;
  for (const int s : scales) sc += (sc.empty() ? "" : ",") + std::to_string(s);
  return {{"lr", fmt_double(lr)},
          {"batch_size", std::to_string(batch_size)},
          {"k", std::to_string(refinements)},
          {"nms_iou", fmt_double(nms_iou)},
          {"oicr_iou", fmt_double(oicr_iou)},
          {"scales", sc},
          {"base_scale", std::to_string(base_scale)},
          {"max_proposals", std::to_string(max_proposals)},
          {"seed", std::to_string(seed)},
          {"steps", std::to_string(steps)},
          {"eval_interval", std::to_string(eval_interval)},
          {"checkpoint_interval", std::to_string(checkpoint_interval)},
          {"flip", flip ? "true" : "false"},
          {"score_floor", fmt_double(score_floor)},
          {"aggregation", aggregation == ScoreAggregation::last_head ? "last" : "mean"}};
}

void TrainConfig::set(const std::string& key, const std::string& raw) {
  const auto value = trim(raw);
  if (key == "lr") lr = parse_number<double>(key, value);
  else if (key == "batch_size") batch_size = parse_number<std::size_t>(key, value);
  else if (key == "k" || key == "refinements") refinements = parse_number<std::size_t>(key, value);
  else if (key == "nms_iou") nms_iou = parse_number<double>(key, value);
  else if (key == "oicr_iou") oicr_iou = parse_number<double>(key, value);
  else if (key == "base_scale") base_scale = parse_number<int>(key, value);
  else if (key == "max_proposals") max_proposals = parse_number<std::size_t>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "steps") steps = parse_number<std::size_t>(key, value);
  else if (key == "eval_interval") eval_interval = parse_number<std::size_t>(key, value);
  else if (key == "checkpoint_interval") checkpoint_interval = parse_number<std::size_t>(key, value);
  else if (key == "flip") flip = parse_bool(key, value);
  else if (key == "score_floor") score_floor = parse_number<double>(key, value);
  else if (key == "aggregation") {
    if (value == "mean") aggregation = ScoreAggregation::mean_of_heads;
    else if (value == "last") aggregation = ScoreAggregation::last_head;
    else throw ConfigError("aggregation must be 'mean' or 'last'");
  } else if (key == "scales") {
    std::vector<int> parsed;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) parsed.push_back(parse_number<int>(key, trim(item)));
    scales = std::move(parsed);
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

void apply_config_file(TrainConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
    try {
      config.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
}

void apply_env_overrides(TrainConfig& config, const char* prefix) {
  for (const auto& [key, _] : config.to_map()) {
    std::string name = prefix;
    for (const char ch : key) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
    if (const char* v = std::getenv(name.c_str())) config.set(key, v);
  }
}

void write_config_file(const TrainConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& [k, v] : config.to_map()) out << k << " = " << v << '\n';
}

}  // namespace wsod
