#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "objslam/eval.hpp"
#include "objslam/factors.hpp"
#include "objslam/solver.hpp"
#include "objslam/synth.hpp"

namespace objslam {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SamplingConfig {
  int n_uniform = 9;
  int max_corners = 16;
  double corner_quality = 0.01;
  /// Relative gradient threshold when an edge raster is not binary.
  double edge_threshold = 0.2;
};

/// Ablation switches. support/ssc apply to both initialization and the map
/// solve; unit_ratio replaces every table prior by (1, 1).
struct FeatureConfig {
  bool support = true;
  bool ssc = true;
  bool unit_ratio = false;
  bool symmetry = true;
  bool refine = true;
  bool optimize = true;
  bool full_dof_refine = false;
  UnknownLabelPolicy unknown_label = UnknownLabelPolicy::Skip;
  int init_yaw_seeds = 4;
  /// Init solutions costing up to this multiple of the best one are all
  /// refined and the lowest symmetry cost wins.
  double candidate_cost_ratio = 4.0;
  /// Symmetry refinement and symmetry factors are used only when the camera
  /// is within this angle of the estimated symmetry plane (see
  /// symmetry_view_angle_deg).
  double symmetry_max_view_deg = 20.0;
  double refine_scan_deg = 45.0;
  double refine_scan_step_deg = 3.0;
};

struct DataConfig {
  bool partial_filter = true;
  double partial_margin = 30.0;
  /// Largest trajectory/frame-index timestamp gap accepted as a match.
  double timestamp_tolerance = 0.02;
};

struct RunConfig {
  std::uint64_t seed = 0;
  NoiseModel noise;
  LMConfig lm;
  /// Iteration cap of the joint map solve.
  int map_max_iterations = 30;
  SymmetryOptions symmetry;
  SamplingConfig sampling;
  FeatureConfig features;
  DataConfig data;
  EvalOptions eval;
  SceneConfig synth;
};

/// `key = value` lines grouped under `[section]` headers; `#` starts a comment.
/// Unknown keys and malformed values are errors.
RunConfig parse_config(const std::string& text, const std::string& source = "<string>");
RunConfig load_config(const std::string& path);
/// Every setting with its current value, in a form parse_config accepts.
std::string dump_config(const RunConfig& cfg);
/// 16 hex digits of FNV-1a over dump_config.
std::string config_hash(const RunConfig& cfg);

}  // namespace objslam
