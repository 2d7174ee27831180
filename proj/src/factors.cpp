#include "objslam/factors.hpp"

#include <cmath>

namespace objslam {

void ScaleRatioTable::set(const std::string& label, const ScaleRatio& ratio) {
  if (!ratio.valid()) throw PreconditionError("scale ratio for '" + label + "' must be positive");
  entries_[label] = ratio;
}

std::optional<ScaleRatio> ScaleRatioTable::find(const std::string& label) const {
  const auto it = entries_.find(label);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

bool NoiseModel::valid() const {
  return sigma_det > 0 && sigma_theta > 0 && sigma_pi > 0 && sigma_ssc > 0 && sigma_odom_rot > 0 &&
         sigma_odom_trans > 0 && sigma_sym > 0 && huber_delta > 0;
}

Eigen::Vector4d bbox_residual(const Ellipsoid& e, const BBox& b, const ProjectionMatrix& p,
                              const NoiseModel& noise) {
  const QuadricMatrix dual = ellipsoid_to_dual(e);
  const auto planes = backproject_bbox_planes(p, b);
  Eigen::Vector4d r;
  for (int i = 0; i < 4; ++i) r(i) = plane_tangency_residual(planes[i], dual) / noise.sigma_det;
  return r;
}

Vec3 support_residual(const Ellipsoid& e, const Plane& plane, const NoiseModel& noise) {
  const Vec3& n = plane.normal;
  return {object_axis(e, Axis::X).dot(n) / noise.sigma_theta,
          object_axis(e, Axis::Y).dot(n) / noise.sigma_theta,
          plane_tangency_residual(plane, ellipsoid_to_dual(e)) / noise.sigma_pi};
}

ScaleRatio scale_ratio(const Ellipsoid& e) {
  return {e.half_axes.x() / e.half_axes.z(), e.half_axes.y() / e.half_axes.z()};
}

Eigen::Vector2d ssc_residual(const Ellipsoid& e, const ScaleRatio& prior, const NoiseModel& noise) {
  const ScaleRatio r = scale_ratio(e);
  return Eigen::Vector2d(r.sigma - prior.sigma, r.beta - prior.beta) / noise.sigma_ssc;
}

std::optional<Eigen::Vector2d> ssc_residual(const Ellipsoid& e, const ScaleRatioTable& table,
                                            const NoiseModel& noise, UnknownLabelPolicy policy) {
  if (const auto prior = table.find(e.label)) return ssc_residual(e, *prior, noise);
  if (policy == UnknownLabelPolicy::Skip) return std::nullopt;
  return ssc_residual(e, ScaleRatio{1.0, 1.0}, noise);
}

Vec6 odometry_residual(const Pose& pose_i, const Pose& pose_j, const Pose& measured_ij,
                       const NoiseModel& noise) {
  const Pose err = measured_ij.inverse() * (pose_i.inverse() * pose_j);
  Vec6 r;
  r.head<3>() = so3_log(err.rotation) / noise.sigma_odom_rot;
  r.tail<3>() = err.translation / noise.sigma_odom_trans;
  return r;
}

double huber(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

void FactorGraph::validate() const {
  auto need_pose = [&](int f) {
    if (!poses.count(f)) throw PreconditionError("factor references missing frame " + std::to_string(f));
  };
  auto need_object = [&](int o) {
    if (!objects.count(o)) throw PreconditionError("factor references missing object " + std::to_string(o));
  };
  for (const auto& f : observations) {
    need_pose(f.frame_id);
    need_object(f.object_id);
  }
  for (const auto& f : odometry) {
    need_pose(f.frame_i);
    need_pose(f.frame_j);
  }
  for (const auto& f : supports) need_object(f.object_id);
  for (const auto& f : scales) need_object(f.object_id);
  for (const auto& f : symmetries) {
    need_pose(f.frame_id);
    need_object(f.object_id);
    if (!f.data || !f.data->field) throw PreconditionError("symmetry factor without a distance field");
  }
}

std::map<int, int> FactorGraph::observation_counts() const {
  std::map<int, int> counts;
  for (const auto& f : observations) ++counts[f.object_id];
  return counts;
}

Eigen::VectorXd factor_residual(const FactorGraph& g, const NoiseModel& noise, std::size_t index) {
  if (index < g.observations.size()) {
    const auto& f = g.observations[index];
    const auto p = compose_projection(g.poses.at(f.frame_id), g.intrinsics);
    return bbox_residual(g.objects.at(f.object_id), f.bbox, p, noise);
  }
  index -= g.observations.size();
  if (index < g.odometry.size()) {
    const auto& f = g.odometry[index];
    return odometry_residual(g.poses.at(f.frame_i), g.poses.at(f.frame_j), f.measured, noise);
  }
  index -= g.odometry.size();
  if (index < g.supports.size()) {
    const auto& f = g.supports[index];
    return support_residual(g.objects.at(f.object_id), f.plane, noise);
  }
  index -= g.supports.size();
  if (index < g.scales.size()) {
    const auto& f = g.scales[index];
    return ssc_residual(g.objects.at(f.object_id), f.prior, noise);
  }
  index -= g.scales.size();
  const auto& f = g.symmetries.at(index);
  const auto p = compose_projection(g.poses.at(f.frame_id), g.intrinsics);
  SymmetryOptions opts = g.symmetry_options;
  opts.sigma_sym = noise.sigma_sym;
  Eigen::VectorXd r(static_cast<Eigen::Index>(f.data->samples.size()));
  symmetry_residuals(g.objects.at(f.object_id), f.data->samples, *f.data->field, p, opts, r);
  return r;
}

double graph_total_cost_serial(const FactorGraph& g, const NoiseModel& noise) {
  double total = 0.0;
  for (std::size_t i = 0; i < g.factor_count(); ++i) {
    total += huber(factor_residual(g, noise, i).norm(), noise.huber_delta);
  }
  return total;
}

double graph_total_cost(const FactorGraph& g, const NoiseModel& noise) {
  const auto n = static_cast<std::ptrdiff_t>(g.factor_count());
  std::vector<double> terms(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    terms[i] = huber(factor_residual(g, noise, static_cast<std::size_t>(i)).norm(), noise.huber_delta);
  }
  double total = 0.0;
  for (double t : terms) total += t;
  return total;
}

}  // namespace objslam
