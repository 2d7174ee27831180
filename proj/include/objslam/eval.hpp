#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "objslam/dataio.hpp"
#include "objslam/geometry.hpp"

namespace objslam {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Grid IoU: resolution^3 cell centres over the axis-aligned box bounding
/// both cuboids. Counting runs in parallel; the result does not depend on the
/// thread count.
double cuboid_iou(const Cuboid& a, const Cuboid& b, int resolution = 64);
double cuboid_iou_serial(const Cuboid& a, const Cuboid& b, int resolution = 64);

/// The 24 proper rotations mapping the coordinate axes onto themselves.
const std::array<Mat3, 24>& cube_rotation_group();

/// Geodesic angle of a rotation matrix, degrees.
double rotation_angle_deg(const Mat3& r);

/// min over the cube group G of angle(r_est^T r_gt g), degrees.
double rotation_error_deg(const Mat3& r_est, const Mat3& r_gt);

struct ObjectMetrics {
  int id = 0;
  std::string label;
  double iou = 0.0;
  double rot_deg = 0.0;
};

struct SkippedObject {
  int id = 0;
  std::string reason;
};

struct EvalReport {
  std::vector<ObjectMetrics> objects;
  std::vector<SkippedObject> skipped;
  double mean_iou = 0.0;
  double mean_rot_deg = 0.0;

  std::size_t count() const { return objects.size(); }
};

struct EvalOptions {
  int resolution = 64;
  /// Objects seen fewer times are skipped. Counts come from the ground-truth
  /// document, falling back to the estimate when the truth has none.
  int min_observations = 3;
};

/// Matches objects by id. Throws EvalError("no matched objects") when no
/// object survives matching and filtering.
EvalReport evaluate_map(const MapDocument& est, const MapDocument& gt, const EvalOptions& opts = {});

/// `object_id,label,iou,rot_deg` rows plus a final `mean` row. `comments`
/// become leading `# ` lines.
std::string report_to_csv(const EvalReport& report, const std::vector<std::string>& comments = {});

}  // namespace objslam
