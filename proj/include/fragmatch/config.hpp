#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fragmatch/breaking_curves.hpp"

namespace fragmatch {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Preset { synthetic, scanned, custom };

/// Every tunable of the pipeline. A preset fills in a complete set first;
/// config-file entries and then command-line flags override it.
///
///  key                       synthetic  scanned   meaning
///  k                         15         15        kNN count for the ε estimate
///  epsilon_scale             2.0        2.0       ε' = scale · ε
///  tau                       0.99       0.90      curve point iff ω < tau
///  min_component             10         20        raw curve components below this are dropped
///  prune_depth               3          3         endpoint-erosion rounds
///  dilate_steps              0          1         dilation rounds
///  k_vote                    5          5         voters for curve-point absorption
///  min_region_fraction       0.02       0.02      regions below this share of |P| are skipped
///  icp.max_iterations        100        100
///  icp.cutoff_epsilons       5.0        5.0       correspondence cutoff, in multiples of ε'
///  icp.convergence_eps       1e-7       1e-7      on the RMS change, in model units
///  icp.max_source_points     1500       1500      0 uses every point
///  corner_neighborhood       graph      graph     graph | knn
///  voxel_size                none       none      optional voxel-grid downsampling
///  seed                      0          0
///
/// The synthetic values come from sweeps over seeded cube fractures. At
/// scale 1 the ε-ball holds about seven neighbours and the curve bands do
/// not close; a 90° edge only reaches ω ≈ 0.86 and obtuse edges sit above
/// 0.95, so tau must be close to 1. Exactly flat samples give ω = 1.
/// The raw band on clean samples is already about ε' wide, and a dilation
/// round would double it; scans keep one round to close gaps.
/// `scanned` values are engineering estimates for real scans with sensor
/// noise; no reference values exist for them.
struct PipelineConfig {
  Preset preset = Preset::synthetic;
  std::size_t k = 15;
  double epsilon_scale = 2.0;
  double tau = 0.99;
  std::size_t min_component = 10;
  std::size_t prune_depth = 3;
  std::size_t dilate_steps = 0;
  std::size_t k_vote = 5;
  double min_region_fraction = 0.02;
  std::size_t icp_max_iterations = 100;
  double icp_cutoff_epsilons = 5.0;
  double icp_convergence_eps = 1e-7;
  std::size_t icp_max_source_points = 1500;
  CornerNeighborhood corner_neighborhood = CornerNeighborhood::graph;
  std::optional<double> voxel_size;
  std::uint64_t seed = 0;

  RefineParams refine_params() const { return {min_component, prune_depth, dilate_steps}; }

  static PipelineConfig for_preset(Preset p) {
    PipelineConfig c;
    c.preset = p;
    if (p == Preset::scanned) {
      c.tau = 0.90;
      c.min_component = 20;
      c.dilate_steps = 1;
    }
    return c;
  }

  void validate() const {
    const auto bad = [](const std::string& what) { return ConfigError("invalid configuration: " + what); };
    if (k == 0) throw bad("k must be positive");
    if (!(epsilon_scale > 0.0)) throw bad("epsilon_scale must be positive");
    if (!(tau > 0.0 && tau < 1.0)) throw bad("tau must lie in (0, 1)");
    if (min_component == 0) throw bad("min_component must be positive");
    if (k_vote == 0) throw bad("k_vote must be positive");
    if (!(min_region_fraction > 0.0 && min_region_fraction < 1.0)) throw bad("min_region_fraction must lie in (0, 1)");
    if (icp_max_iterations == 0) throw bad("icp.max_iterations must be positive");
    if (!(icp_cutoff_epsilons > 0.0)) throw bad("icp.cutoff_epsilons must be positive");
    if (!(icp_convergence_eps > 0.0)) throw bad("icp.convergence_eps must be positive");
    if (voxel_size && !(*voxel_size > 0.0)) throw bad("voxel_size must be positive");
  }
};

inline std::string to_string(Preset p) {
  switch (p) {
    case Preset::synthetic: return "synthetic";
    case Preset::scanned: return "scanned";
    case Preset::custom: return "custom";
  }
  return "?";
}

inline Preset parse_preset(const std::string& s) {
  if (s == "synthetic") return Preset::synthetic;
  if (s == "scanned") return Preset::scanned;
  if (s == "custom") return Preset::custom;
  throw ConfigError("unknown preset '" + s + "' (expected synthetic, scanned or custom)");
}

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string unquote(const std::string& s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) return s.substr(1, s.size() - 2);
  return s;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* first = value.data();
  const auto* last = value.data() + value.size();
  if constexpr (std::is_unsigned_v<T>) {
    if (!value.empty() && value.front() == '-') throw ConfigError("'" + key + "' must be non-negative, got " + value);
  }
  auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc{} || res.ptr != last) throw ConfigError("'" + key + "': cannot parse '" + value + "'");
  return out;
}

}  // namespace config_detail

/// Parses `key = value` lines. `[section]` headers prefix the following keys
/// with `section.`; `#` starts a comment. Values may be quoted.
inline ConfigEntries parse_config_text(const std::string& text, const std::string& origin = "config") {
  using namespace config_detail;
  ConfigEntries out;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Strip comments outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(origin + ":" + std::to_string(line_no) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = unquote(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    // `[preset] name = scanned` is accepted as a spelling of `preset = scanned`.
    if (section == "preset" && key == "name") key = "preset";
    else if (!section.empty() && section != "preset") key = section + "." + key;
    out.emplace_back(std::move(key), value);
  }
  return out;
}

inline ConfigEntries read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

/// Sets one key. Unknown keys are an error.
inline void apply_entry(PipelineConfig& c, const std::string& key, const std::string& value) {
  using config_detail::parse_number;
  if (key == "preset") c.preset = parse_preset(value);
  else if (key == "k") c.k = parse_number<std::size_t>(key, value);
  else if (key == "epsilon_scale") c.epsilon_scale = parse_number<double>(key, value);
  else if (key == "tau") c.tau = parse_number<double>(key, value);
  else if (key == "min_component") c.min_component = parse_number<std::size_t>(key, value);
  else if (key == "prune_depth") c.prune_depth = parse_number<std::size_t>(key, value);
  else if (key == "dilate_steps") c.dilate_steps = parse_number<std::size_t>(key, value);
  else if (key == "k_vote") c.k_vote = parse_number<std::size_t>(key, value);
  else if (key == "min_region_fraction") c.min_region_fraction = parse_number<double>(key, value);
  else if (key == "icp.max_iterations") c.icp_max_iterations = parse_number<std::size_t>(key, value);
  else if (key == "icp.cutoff_epsilons") c.icp_cutoff_epsilons = parse_number<double>(key, value);
  else if (key == "icp.convergence_eps") c.icp_convergence_eps = parse_number<double>(key, value);
  else if (key == "icp.max_source_points") c.icp_max_source_points = parse_number<std::size_t>(key, value);
  else if (key == "corner_neighborhood") {
    if (value == "graph") c.corner_neighborhood = CornerNeighborhood::graph;
    else if (value == "knn") c.corner_neighborhood = CornerNeighborhood::knn;
    else throw ConfigError("corner_neighborhood must be graph or knn, got '" + value + "'");
  } else if (key == "voxel_size") {
    if (value == "none" || value.empty()) c.voxel_size.reset();
    else c.voxel_size = parse_number<double>(key, value);
  } else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

/// Preset expansion, then file entries, then flag entries. The preset is
/// taken from the flags if given there, else from the file, else synthetic.
inline PipelineConfig resolve_config(const ConfigEntries& file_entries, const ConfigEntries& flag_entries) {
  Preset preset = Preset::synthetic;
  for (const auto* src : {&file_entries, &flag_entries})
    for (const auto& [k, v] : *src)
      if (k == "preset") preset = parse_preset(v);
  PipelineConfig c = PipelineConfig::for_preset(preset);
  for (const auto* src : {&file_entries, &flag_entries})
    for (const auto& [k, v] : *src)
      if (k != "preset") apply_entry(c, k, v);
  c.validate();
  return c;
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["preset"] = to_string(c.preset);
  j["k"] = c.k;
  j["epsilon_scale"] = c.epsilon_scale;
  j["tau"] = c.tau;
  j["min_component"] = c.min_component;
  j["prune_depth"] = c.prune_depth;
  j["dilate_steps"] = c.dilate_steps;
  j["k_vote"] = c.k_vote;
  j["min_region_fraction"] = c.min_region_fraction;
  j["icp"] = {{"max_iterations", c.icp_max_iterations},
              {"cutoff_epsilons", c.icp_cutoff_epsilons},
              {"convergence_eps", c.icp_convergence_eps},
              {"max_source_points", c.icp_max_source_points}};
  j["corner_neighborhood"] = c.corner_neighborhood == CornerNeighborhood::graph ? "graph" : "knn";
  j["voxel_size"] = c.voxel_size ? nlohmann::json(*c.voxel_size) : nlohmann::json(nullptr);
  j["seed"] = c.seed;
  return j;
}

}  // namespace fragmatch
