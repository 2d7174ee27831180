#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "objslam/dataio.hpp"
#include "objslam/factors.hpp"
#include "objslam/geometry.hpp"
#include "objslam/symmetry.hpp"

namespace objslam {

class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Object class used by the generator: half-axis ratios a/c and b/c.
struct SynthClass {
  std::string label;
  ScaleRatio ratio;
};

std::vector<SynthClass> default_synth_classes();

struct RenderOptions {
  int curves = 20;
  /// Densify until consecutive projected samples are closer than this.
  double max_step_px = 0.3;
  /// The silhouette is view dependent and not mirror symmetric; off by
  /// default so every edge pixel has a mirrored partner.
  bool silhouette = false;
};

enum class TrajectoryType { Orbit, Forward };

struct SceneConfig {
  int num_objects = 5;
  /// Range of the vertical half-axis c in meters; a and b follow from the
  /// class ratios.
  double height_min = 0.2;
  double height_max = 0.4;
  /// Relative uniform jitter applied to each class ratio per object.
  double ratio_jitter = 0.0;
  std::vector<SynthClass> classes = default_synth_classes();
  /// Objects are placed inside this radius around the plane origin.
  double placement_radius = 2.0;
  double min_gap = 0.1;
  Plane plane{Vec3::UnitZ(), 0.0};

  TrajectoryType trajectory = TrajectoryType::Orbit;
  double orbit_radius = 5.0;
  double orbit_arc_deg = 360.0;
  double forward_length = 4.0;
  double camera_height = 1.6;
  int frames = 50;
  double frame_rate = 10.0;

  CameraIntrinsics intrinsics{525.0, 525.0, 319.5, 239.5};
  int image_width = 640;
  int image_height = 480;

  double bbox_noise = 2.0;
  int stride = 1;
  std::uint64_t seed = 0;

  /// Render a symmetric edge map for each object's first observation.
  bool render_edges = true;
  RenderOptions render;

  bool valid() const;
};

struct Scene {
  SceneConfig config;
  std::map<int, Ellipsoid> objects;
  std::vector<int> frame_ids;
  std::vector<TrajectoryRecord> trajectory;  // parallel to frame_ids
  std::vector<DetectionRecord> detections;
  /// Noiseless boxes, parallel to `detections`.
  std::vector<BBox> true_bboxes;
  ScaleRatioTable scale_table;
  /// Full-frame edge rasters keyed by (frame_id, object_id).
  std::map<std::pair<int, int>, GrayImage> edge_images;

  ProjectionMatrix projection(int frame_id) const;
  std::map<int, int> observation_counts() const;
};

/// Deterministic in cfg.seed. Throws SynthError("placement failed") when the
/// objects cannot be placed without overlap.
Scene generate_scene(const SceneConfig& cfg);

/// Rotation looking from `eye` towards `target` (camera x right, y down,
/// z forward) with `up` pointing up in the image.
Mat3 look_at_rotation(const Vec3& eye, const Vec3& target, const Vec3& up);

/// Edge map over `window` made of random surface curves on the object's
/// y >= 0 half and their mirror images across the XZ plane. A pair is drawn
/// only when both points are front-facing and both marked pixel centres hit
/// the ellipsoid. The silhouette, when enabled, is the ring of pixels whose
/// centres hit the ellipsoid next to one that does not. Throws SynthError
/// ("not visible") when no pixel in the window sees the object.
EdgeMap render_symmetric_edges(const Ellipsoid& e, const ProjectionMatrix& p, const BBox& window,
                               std::uint64_t pattern_seed, const RenderOptions& opts = {});

/// Rotates by exactly yaw_err_deg about the object's Z axis, shifts the
/// centre by center_err meters in a seeded direction and scales each half-axis
/// by a seeded factor in [1 - scale_err, 1 + scale_err].
Ellipsoid perturb_ellipsoid(const Ellipsoid& e, double yaw_err_deg, double center_err, double scale_err,
                            std::uint64_t seed);

/// Writes trajectory.txt, frames.txt, detections.txt, planes.txt,
/// scale_table.txt, gt.json and edges/<frame>_<object>.pgm under `dir`.
void export_dataset(const Scene& scene, const std::string& dir,
                    const std::map<std::string, std::string>& metadata = {});

}  // namespace objslam
