#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "objslam/config.hpp"
#include "objslam/dataio.hpp"
#include "objslam/solver.hpp"

namespace objslam {

/// Everything a run needs from a dataset directory (see export_dataset for
/// the file names). Detections are already filtered and matched to poses.
struct Dataset {
  std::string root;
  PlanesIntrinsics planes;
  std::map<int, Pose> frame_poses;    // frame id -> world <- camera
  std::map<int, double> frame_times;  // frame id -> timestamp
  std::vector<DetectionRecord> detections;
  ScaleRatioTable scale_table;
  /// Edge rasters found under edges/, keyed by (frame_id, object_id).
  std::map<std::pair<int, int>, std::string> edge_files;
};

/// Throws DataError on missing or malformed files.
Dataset load_dataset(const std::string& dir, const RunConfig& cfg, Warnings* warnings = nullptr);

/// Nearest world plane hit by the viewing ray through the bottom centre of
/// the box with the camera on its positive side.
std::optional<Plane> select_support_plane(const std::vector<Plane>& planes, const Pose& world_from_camera,
                                          const CameraIntrinsics& intr, const BBox& bbox);

/// Edge map, distance field and samples for one detection. nullopt when the
/// window holds no edge pixel or no sample. Binary rasters (values 0/255) are
/// read directly; anything else goes through the gradient edge detector.
std::optional<SymmetryObservation> make_symmetry_observation(const GrayImage& raster, const BBox& bbox,
                                                             const SamplingConfig& sampling);

struct ObjectEstimate {
  int id = 0;
  Ellipsoid ellipsoid;
  int init_frame = -1;
  int observations = 0;
  Plane plane;  // world support plane
  bool refined = false;
  double init_cost = 0.0;
};

struct PipelineResult {
  MapDocument map;
  std::vector<ObjectEstimate> objects;
  /// Object ids that could not be initialized from any observation.
  std::vector<int> failed;
  std::optional<SolveReport> map_report;
};

/// Single-frame initialization of every object from its first usable
/// observation, followed by the symmetry refinement when enabled.
PipelineResult run_init(const Dataset& ds, const RunConfig& cfg);

/// run_init plus the joint map optimization when enabled.
PipelineResult run_slam(const Dataset& ds, const RunConfig& cfg);

/// Factor graph over the given estimates (used by run_slam).
FactorGraph build_factor_graph(const Dataset& ds, const RunConfig& cfg, const std::vector<ObjectEstimate>& objects);

struct SweepRow {
  double yaw_deg;
  double cost_gray;
  double cost_2dt;
  double cost_3dt;
};

/// f_sym against yaw offsets in [-range, range] degrees around `reference`
/// using the object's first observation that has an edge raster. Missing
/// costs are NaN.
std::vector<SweepRow> sweep_yaw(const Dataset& ds, const RunConfig& cfg, int object_id, const Ellipsoid& reference,
                                double range_deg = 90.0, double step_deg = 1.0);

}  // namespace objslam
