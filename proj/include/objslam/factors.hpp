#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "objslam/geometry.hpp"
#include "objslam/symmetry.hpp"

namespace objslam {

/// Half-axis ratios a/c and b/c.
struct ScaleRatio {
  double sigma = 1.0;
  double beta = 1.0;

  bool valid() const { return sigma > 0.0 && beta > 0.0; }
};

/// Semantic label -> expected scale ratio.
class ScaleRatioTable {
 public:
  /// Throws PreconditionError for a non-positive ratio.
  void set(const std::string& label, const ScaleRatio& ratio);
  std::optional<ScaleRatio> find(const std::string& label) const;
  bool contains(const std::string& label) const { return entries_.count(label) != 0; }
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, ScaleRatio>& entries() const { return entries_; }

 private:
  std::map<std::string, ScaleRatio> entries_;
};

/// Isotropic standard deviations per residual family.
struct NoiseModel {
  double sigma_det = 10.0;
  double sigma_theta = 10.0;
  double sigma_pi = 10.0;
  double sigma_ssc = 1.0;
  double sigma_odom_rot = 0.01;
  double sigma_odom_trans = 0.01;
  double sigma_sym = 1.0;
  double huber_delta = 1.0;

  bool valid() const;
};

enum class UnknownLabelPolicy { Skip, UnitRatio };

struct Observation {
  int frame_id = 0;
  int object_id = 0;
  BBox bbox;
  std::string label;
};

/// Tangency of the four back-projected bbox planes, divided by sigma_det,
/// in the order x_min, x_max, y_min, y_max.
Eigen::Vector4d bbox_residual(const Ellipsoid& e, const BBox& b, const ProjectionMatrix& p,
                              const NoiseModel& noise = {});

/// (X.n / sigma_theta, Y.n / sigma_theta, pi^T Q* pi / sigma_pi).
Vec3 support_residual(const Ellipsoid& e, const Plane& plane, const NoiseModel& noise = {});

ScaleRatio scale_ratio(const Ellipsoid& e);

/// (r(e) - prior) / sigma_ssc.
Eigen::Vector2d ssc_residual(const Ellipsoid& e, const ScaleRatio& prior, const NoiseModel& noise = {});

/// Looks the prior up by e.label. nullopt when the label is unknown and the
/// policy is Skip.
std::optional<Eigen::Vector2d> ssc_residual(const Ellipsoid& e, const ScaleRatioTable& table,
                                            const NoiseModel& noise = {},
                                            UnknownLabelPolicy policy = UnknownLabelPolicy::Skip);

/// (log(E.R) / sigma_rot, E.t / sigma_trans) with
/// E = measured_ij^-1 * (pose_i^-1 * pose_j).
Vec6 odometry_residual(const Pose& pose_i, const Pose& pose_j, const Pose& measured_ij,
                       const NoiseModel& noise = {});

/// 0.5 r^2 for |r| <= delta, delta (|r| - 0.5 delta) otherwise.
double huber(double r, double delta);

struct ObservationFactor {
  int frame_id;
  int object_id;
  BBox bbox;
};

struct OdometryFactor {
  int frame_i;
  int frame_j;
  Pose measured;  // pose_i^-1 * pose_j
};

struct SupportFactor {
  int object_id;
  Plane plane;  // world frame, |n| = 1
};

struct ScaleFactor {
  int object_id;
  ScaleRatio prior;
};

struct SymmetryFactor {
  int object_id;
  int frame_id;
  std::shared_ptr<const SymmetryObservation> data;
};

/// Camera poses (world<-camera, by frame id), object landmarks (by object id)
/// and the residual blocks linking them.
struct FactorGraph {
  CameraIntrinsics intrinsics;
  std::map<int, Pose> poses;
  std::map<int, Ellipsoid> objects;
  std::vector<ObservationFactor> observations;
  std::vector<OdometryFactor> odometry;
  std::vector<SupportFactor> supports;
  std::vector<ScaleFactor> scales;
  std::vector<SymmetryFactor> symmetries;
  SymmetryOptions symmetry_options;

  std::size_t factor_count() const {
    return observations.size() + odometry.size() + supports.size() + scales.size() +
           symmetries.size();
  }
  /// Throws PreconditionError when a factor references a missing node.
  void validate() const;
  /// Observation factors per object id.
  std::map<int, int> observation_counts() const;
};

/// Whitened residual of one factor, in the canonical factor order
/// (observations, odometry, supports, scales, symmetries).
Eigen::VectorXd factor_residual(const FactorGraph& g, const NoiseModel& noise, std::size_t index);

/// Sum over factors of huber(|whitened residual|). Factor residuals are
/// evaluated in parallel and reduced in canonical order.
double graph_total_cost(const FactorGraph& g, const NoiseModel& noise);
double graph_total_cost_serial(const FactorGraph& g, const NoiseModel& noise);

}  // namespace objslam
