#include "objslam/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace objslam {

namespace {

struct Entry {
  std::string section;
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError("expected a number, got '" + s + "'");
  return v;
}

template <typename Int>
Int parse_int(const std::string& s) {
  Int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("expected an integer, got '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("expected true or false, got '" + s + "'");
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

Entry real(const std::string& sec, const std::string& key, double& ref) {
  return {sec, key, [&ref](const std::string& v) { ref = parse_double(v); }, [&ref] { return fmt_double(ref); }};
}

Entry integer(const std::string& sec, const std::string& key, int& ref) {
  return {sec, key, [&ref](const std::string& v) { ref = parse_int<int>(v); },
          [&ref] { return std::to_string(ref); }};
}

Entry boolean(const std::string& sec, const std::string& key, bool& ref) {
  return {sec, key, [&ref](const std::string& v) { ref = parse_bool(v); },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

std::vector<Entry> registry(RunConfig& c) {
  std::vector<Entry> e;
  e.push_back({"run", "seed", [&c](const std::string& v) { c.seed = parse_int<std::uint64_t>(v); },
               [&c] { return std::to_string(c.seed); }});

  e.push_back(real("noise", "sigma_det", c.noise.sigma_det));
  e.push_back(real("noise", "sigma_theta", c.noise.sigma_theta));
  e.push_back(real("noise", "sigma_pi", c.noise.sigma_pi));
  e.push_back(real("noise", "sigma_ssc", c.noise.sigma_ssc));
  e.push_back(real("noise", "sigma_odom_rot", c.noise.sigma_odom_rot));
  e.push_back(real("noise", "sigma_odom_trans", c.noise.sigma_odom_trans));
  e.push_back(real("noise", "sigma_sym", c.noise.sigma_sym));
  e.push_back(real("noise", "huber_delta", c.noise.huber_delta));

  e.push_back(integer("lm", "max_iterations", c.lm.max_iterations));
  e.push_back(real("lm", "initial_lambda", c.lm.initial_lambda));
  e.push_back(real("lm", "lambda_up", c.lm.lambda_up));
  e.push_back(real("lm", "lambda_down", c.lm.lambda_down));
  e.push_back(real("lm", "cost_tolerance", c.lm.cost_tolerance));
  e.push_back(real("lm", "step_tolerance", c.lm.step_tolerance));
  e.push_back(real("lm", "gradient_tolerance", c.lm.gradient_tolerance));
  e.push_back(real("lm", "fd_step", c.lm.fd_step));
  e.push_back(integer("lm", "map_max_iterations", c.map_max_iterations));

  e.push_back(boolean("symmetry", "normalize", c.symmetry.normalize));
  e.push_back(boolean("symmetry", "skip_back_facing", c.symmetry.skip_back_facing));
  e.push_back(real("symmetry", "max_incidence_deg", c.symmetry.max_incidence_deg));
  e.push_back(real("symmetry", "min_valid_fraction", c.symmetry.min_valid_fraction));

  e.push_back(integer("sampling", "n_uniform", c.sampling.n_uniform));
  e.push_back(integer("sampling", "max_corners", c.sampling.max_corners));
  e.push_back(real("sampling", "corner_quality", c.sampling.corner_quality));
  e.push_back(real("sampling", "edge_threshold", c.sampling.edge_threshold));

  e.push_back(boolean("features", "support", c.features.support));
  e.push_back(boolean("features", "ssc", c.features.ssc));
  e.push_back(boolean("features", "unit_ratio", c.features.unit_ratio));
  e.push_back(boolean("features", "symmetry", c.features.symmetry));
  e.push_back(boolean("features", "refine", c.features.refine));
  e.push_back(boolean("features", "optimize", c.features.optimize));
  e.push_back(boolean("features", "full_dof_refine", c.features.full_dof_refine));
  e.push_back({"features", "unknown_label",
               [&c](const std::string& v) {
                 const std::string s = unquote(v);
                 if (s == "skip") {
                   c.features.unknown_label = UnknownLabelPolicy::Skip;
                 } else if (s == "unit") {
                   c.features.unknown_label = UnknownLabelPolicy::UnitRatio;
                 } else {
                   throw ConfigError("unknown_label must be \"skip\" or \"unit\"");
                 }
               },
               [&c] {
                 return std::string(c.features.unknown_label == UnknownLabelPolicy::Skip ? "\"skip\"" : "\"unit\"");
               }});
  e.push_back(integer("features", "init_yaw_seeds", c.features.init_yaw_seeds));
  e.push_back(real("features", "candidate_cost_ratio", c.features.candidate_cost_ratio));
  e.push_back(real("features", "symmetry_max_view_deg", c.features.symmetry_max_view_deg));
  e.push_back(real("features", "refine_scan_deg", c.features.refine_scan_deg));
  e.push_back(real("features", "refine_scan_step_deg", c.features.refine_scan_step_deg));

  e.push_back(boolean("data", "partial_filter", c.data.partial_filter));
  e.push_back(real("data", "partial_margin", c.data.partial_margin));
  e.push_back(real("data", "timestamp_tolerance", c.data.timestamp_tolerance));

  e.push_back(integer("eval", "iou_resolution", c.eval.resolution));
  e.push_back(integer("eval", "min_observations", c.eval.min_observations));

  SceneConfig& s = c.synth;
  e.push_back(integer("synth", "num_objects", s.num_objects));
  e.push_back(real("synth", "height_min", s.height_min));
  e.push_back(real("synth", "height_max", s.height_max));
  e.push_back(real("synth", "ratio_jitter", s.ratio_jitter));
  e.push_back(real("synth", "placement_radius", s.placement_radius));
  e.push_back(real("synth", "min_gap", s.min_gap));
  e.push_back({"synth", "trajectory",
               [&s](const std::string& v) {
                 const std::string t = unquote(v);
                 if (t == "orbit") {
                   s.trajectory = TrajectoryType::Orbit;
                 } else if (t == "forward") {
                   s.trajectory = TrajectoryType::Forward;
                 } else {
                   throw ConfigError("trajectory must be \"orbit\" or \"forward\"");
                 }
               },
               [&s] { return std::string(s.trajectory == TrajectoryType::Orbit ? "\"orbit\"" : "\"forward\""); }});
  e.push_back(real("synth", "orbit_radius", s.orbit_radius));
  e.push_back(real("synth", "orbit_arc_deg", s.orbit_arc_deg));
  e.push_back(real("synth", "forward_length", s.forward_length));
  e.push_back(real("synth", "camera_height", s.camera_height));
  e.push_back(integer("synth", "frames", s.frames));
  e.push_back(real("synth", "frame_rate", s.frame_rate));
  e.push_back(real("synth", "fx", s.intrinsics.fx));
  e.push_back(real("synth", "fy", s.intrinsics.fy));
  e.push_back(real("synth", "cx", s.intrinsics.cx));
  e.push_back(real("synth", "cy", s.intrinsics.cy));
  e.push_back(integer("synth", "image_width", s.image_width));
  e.push_back(integer("synth", "image_height", s.image_height));
  e.push_back(real("synth", "bbox_noise", s.bbox_noise));
  e.push_back(integer("synth", "stride", s.stride));
  e.push_back(boolean("synth", "render_edges", s.render_edges));
  e.push_back(integer("synth", "edge_curves", s.render.curves));
  e.push_back(boolean("synth", "edge_silhouette", s.render.silhouette));
  e.push_back(real("synth", "plane_nx", s.plane.normal.x()));
  e.push_back(real("synth", "plane_ny", s.plane.normal.y()));
  e.push_back(real("synth", "plane_nz", s.plane.normal.z()));
  e.push_back(real("synth", "plane_d", s.plane.offset));
  return e;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
  RunConfig cfg;
  const auto entries = registry(cfg);
  std::istringstream in(text);
  std::string raw;
  std::string section = "run";
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const std::string where = source + ":" + std::to_string(number) + ": ";
    std::string line = raw;
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
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected `key = value`");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool found = false;
    for (const auto& e : entries) {
      if (e.section == section && e.key == key) {
        try {
          e.set(value);
        } catch (const ConfigError& err) {
          throw ConfigError(where + section + "." + key + ": " + err.what());
        }
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError(where + "unknown key " + section + "." + key);
  }
  if (!cfg.lm.valid()) throw ConfigError(source + ": invalid [lm] settings");
  if (!cfg.noise.valid()) throw ConfigError(source + ": every [noise] sigma must be positive");
  if (cfg.map_max_iterations <= 0) throw ConfigError(source + ": lm.map_max_iterations must be positive");
  if (!cfg.synth.valid()) throw ConfigError(source + ": invalid [synth] settings");
  if (cfg.sampling.n_uniform < 0 || cfg.sampling.max_corners < 0) {
    throw ConfigError(source + ": sample counts must be non-negative");
  }
  if (!(cfg.symmetry.max_incidence_deg > 0.0 && cfg.symmetry.max_incidence_deg <= 90.0)) {
    throw ConfigError(source + ": symmetry.max_incidence_deg must be in (0, 90]");
  }
  if (!(cfg.symmetry.min_valid_fraction >= 0.0 && cfg.symmetry.min_valid_fraction <= 1.0)) {
    throw ConfigError(source + ": symmetry.min_valid_fraction must be in [0, 1]");
  }
  if (!(cfg.features.candidate_cost_ratio >= 1.0)) {
    throw ConfigError(source + ": features.candidate_cost_ratio must be at least 1");
  }
  if (!(cfg.features.refine_scan_deg >= 0.0 && cfg.features.refine_scan_step_deg > 0.0)) {
    throw ConfigError(source + ": refine scan range must be non-negative and its step positive");
  }
  if (cfg.eval.resolution < 32) throw ConfigError(source + ": eval.iou_resolution must be at least 32");
  cfg.synth.seed = cfg.seed;
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string dump_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::string out;
  std::string section;
  for (const auto& e : registry(copy)) {
    if (e.section != section) {
      if (!out.empty()) out += "\n";
      out += "[" + e.section + "]\n";
      section = e.section;
    }
    out += e.key + " = " + e.get() + "\n";
  }
  return out;
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : dump_config(cfg)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace objslam
