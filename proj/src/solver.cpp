#include "objslam/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace objslam {

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

EllipsoidParams ellipsoid_to_params(const Ellipsoid& e) {
  EllipsoidParams x;
  const Vec3 ypr = ypr_from_rotation(e.rotation);
  x << e.center, wrap_angle(ypr(0)), wrap_angle(ypr(1)), wrap_angle(ypr(2)), e.half_axes.array().log().matrix();
  return x;
}

Ellipsoid params_to_ellipsoid(const Eigen::Ref<const Eigen::VectorXd>& x, const std::string& label) {
  Ellipsoid e;
  e.center = x.segment<3>(0);
  e.rotation = rotation_from_ypr(x.segment<3>(3));
  e.half_axes = x.segment<3>(6).array().exp().matrix();
  e.label = label;
  return e;
}

PoseParams pose_to_params(const Pose& pose) {
  PoseParams x;
  x << so3_log(pose.rotation), pose.translation;
  return x;
}

Pose params_to_pose(const Eigen::Ref<const Eigen::VectorXd>& x) {
  return {so3_exp(x.segment<3>(0)), x.segment<3>(3)};
}

Mat3 frame_on_plane(const Vec3& normal, const Vec3& forward) {
  const Vec3 z = normal.normalized();
  Vec3 x = forward - forward.dot(z) * z;
  if (x.norm() < 1e-9) {
    x = z.unitOrthogonal();
  }
  x.normalize();
  Mat3 r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  return r;
}

namespace {

std::optional<Vec3> ray_plane_hit(const ProjectionMatrix& p, const Plane& plane, const Vec2& u) {
  const Vec3 d = p.ray_direction(u);
  const double denom = plane.normal.dot(d);
  if (std::abs(denom) < 1e-12 * d.norm()) return std::nullopt;
  const double s = -plane.signed_distance(p.center()) / denom;
  if (!(s > 0.0)) return std::nullopt;
  return p.center() + s * d;
}

Ellipsoid canonical_up(Ellipsoid e, const Vec3& normal) {
  if (e.rotation.col(2).dot(normal) < 0.0) {
    e.rotation = e.rotation * Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();
  }
  return e;
}

}  // namespace

namespace {

// Angle between the object x axes projected onto the plane, modulo 180 deg
// (an ellipsoid is unchanged by a half turn about its z axis).
double yaw_distance_deg(const Mat3& a, const Mat3& b, const Vec3& n) {
  const Vec3 xa = (a.col(0) - a.col(0).dot(n) * n).normalized();
  const Vec3 xb = (b.col(0) - b.col(0).dot(n) * n).normalized();
  const double angle = std::atan2(xa.cross(xb).dot(n), xa.dot(xb)) * 180.0 / std::numbers::pi;
  const double m = std::fmod(std::abs(angle), 180.0);
  return std::min(m, 180.0 - m);
}

}  // namespace

InitResult init_single_frame(const BBox& b, const Plane& plane, const std::string& label,
                             const ScaleRatioTable& table, const ProjectionMatrix& p,
                             const NoiseModel& noise, const LMConfig& cfg, const InitOptions& opts) {
  if (!b.valid()) throw PreconditionError("bbox has zero area");
  const Plane support = plane.normalized();
  const Vec3& n = support.normal;
  if (!(support.signed_distance(p.center()) > 0.0)) {
    throw PreconditionError("camera is not above the support plane");
  }

  std::optional<ScaleRatio> prior = table.find(label);
  if (!prior && opts.unknown_label == UnknownLabelPolicy::UnitRatio) prior = ScaleRatio{1.0, 1.0};
  const ScaleRatio seed_ratio = prior.value_or(ScaleRatio{1.0, 1.0});

  // Seed: bottom-centre ray meets the plane in front of the object; the
  // object sits behind that point with its height chosen to reproduce the
  // bbox height.
  auto ground = ray_plane_hit(p, support, Vec2(b.center().x(), b.y_max));
  if (!ground) ground = ray_plane_hit(p, support, b.center());
  if (!ground) throw PreconditionError("bbox rays do not meet the support plane");
  const Mat3 base = frame_on_plane(n, *ground - p.center());

  auto seed_at = [&](double c) {
    Ellipsoid e;
    e.half_axes = Vec3(seed_ratio.sigma * c, seed_ratio.beta * c, c);
    e.rotation = base;
    e.center = *ground + base.col(0) * 0.5 * (e.half_axes.x() + e.half_axes.y()) + n * c;
    e.label = label;
    return e;
  };
  auto seed_height = [&](double c) {
    const auto bb = project_dual_conic_bbox(seed_at(c), p);
    return bb ? bb->height() : std::numeric_limits<double>::infinity();
  };
  double lo = 1e-3;
  double hi = 1e-3;
  while (seed_height(hi) < b.height() && hi < 1e3) {
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < 60; ++i) {
    const double mid = std::sqrt(lo * hi);
    (seed_height(mid) < b.height() ? lo : hi) = mid;
  }
  const double c0 = std::sqrt(lo * hi);

  const Eigen::Index m = 4 + (opts.use_support ? 3 : 0) + (prior ? 2 : 0);
  const ResidualFunction residual = [&](const Eigen::VectorXd& x) {
    const Ellipsoid e = params_to_ellipsoid(x, label);
    Eigen::VectorXd r(m);
    r.head<4>() = bbox_residual(e, b, p, noise);
    if (opts.use_support) r.segment<3>(4) = support_residual(e, support, noise);
    if (prior) r.tail<2>() = ssc_residual(e, *prior, noise);
    return r;
  };

  InitResult best;
  bool have_best = false;
  std::vector<InitCandidate> found;
  const int seeds = std::max(1, opts.yaw_seeds);
  for (int k = 0; k < seeds; ++k) {
    Ellipsoid seed = seed_at(c0);
    seed.rotation = base * rot_z(std::numbers::pi * k / seeds);
    const Eigen::VectorXd x0 = ellipsoid_to_params(seed);
    const LMResult run = lm_minimize(residual, x0, cfg);
    if (!run.x.allFinite() || !std::isfinite(run.report.final_cost)) continue;
    const Ellipsoid e = params_to_ellipsoid(run.x, label);
    if (e.valid() && run.report.final_cost <= run.report.initial_cost) {
      found.push_back({canonical_up(e, n), run.report.final_cost});
    }
    if (!have_best || run.report.final_cost < best.report.final_cost) {
      best.ellipsoid = e;
      best.report = run.report;
      best.seed_cost = run.report.initial_cost;
      have_best = true;
    }
  }
  if (!have_best || best.report.final_cost > best.seed_cost || !best.ellipsoid.valid()) {
    throw SolverError("initialization diverged");
  }
  best.ellipsoid = canonical_up(best.ellipsoid, n);
  best.ellipsoid.label = label;
  best.ellipsoid.symmetry_axis_fixed = true;

  std::stable_sort(found.begin(), found.end(),
                   [](const InitCandidate& a, const InitCandidate& b) { return a.cost < b.cost; });
  for (auto& c : found) {
    c.ellipsoid.label = label;
    c.ellipsoid.symmetry_axis_fixed = true;
    const bool duplicate = std::any_of(best.candidates.begin(), best.candidates.end(), [&](const InitCandidate& o) {
      return yaw_distance_deg(o.ellipsoid.rotation, c.ellipsoid.rotation, n) <= 2.0;
    });
    if (!duplicate) best.candidates.push_back(c);
  }
  return best;
}

RefineResult refine_orientation(const Ellipsoid& e, const SampleSet& samples, const DistanceField& field,
                                const ProjectionMatrix& p, const Plane& plane, const NoiseModel& noise,
                                const LMConfig& cfg, const RefineOptions& opts) {
  RefineResult out;
  out.ellipsoid = e;
  const Plane support = plane.normalized();
  SymmetryOptions sym = opts.symmetry;
  sym.sigma_sym = noise.sigma_sym;

  const auto n_samples = static_cast<Eigen::Index>(samples.size());
  auto make = [&](const Eigen::VectorXd& x) {
    if (opts.full_dof) {
      Ellipsoid cand = params_to_ellipsoid(x, e.label);
      cand.symmetry_axis_fixed = e.symmetry_axis_fixed;
      return cand;
    }
    return rotate_about_center(e, support.normal, x(0));
  };
  int valid_samples = 0;
  const ResidualFunction residual = [&](const Eigen::VectorXd& x) {
    const Ellipsoid cand = make(x);
    Eigen::VectorXd r(n_samples + 3);
    valid_samples = symmetry_residuals(cand, samples, field, p, sym, r.head(n_samples));
    r.tail<3>() = support_residual(cand, support, noise);
    return r;
  };

  const Eigen::VectorXd x0 = opts.full_dof ? Eigen::VectorXd(ellipsoid_to_params(e)) : Eigen::VectorXd::Zero(1);
  // Cost at x, or nullopt when too few samples are valid there.
  auto cost_at = [&](const Eigen::VectorXd& x) -> std::optional<double> {
    const Eigen::VectorXd r = residual(x);
    if (valid_samples == 0 || !r.allFinite()) return std::nullopt;
    return 0.5 * r.squaredNorm();
  };
  // An invalid start still gets scanned; only a scan without any valid
  // yaw counts as "no valid samples".
  const auto c0 = cost_at(x0);
  out.initial_cost = out.final_cost = c0 ? *c0 : std::numeric_limits<double>::quiet_NaN();

  // The cost is flat wherever few mirrors are valid, so a local solve alone
  // stalls far from the optimum. Scan yaw first.
  Eigen::VectorXd start = x0;
  double start_cost = c0 ? *c0 : std::numeric_limits<double>::infinity();
  if (opts.scan_range_deg > 0.0) {
    const int steps = static_cast<int>(std::floor(opts.scan_range_deg / opts.scan_step_deg));
    for (int k = -steps; k <= steps; ++k) {
      if (k == 0) continue;
      const double yaw = k * opts.scan_step_deg * std::numbers::pi / 180.0;
      const Eigen::VectorXd x = opts.full_dof
                                    ? Eigen::VectorXd(ellipsoid_to_params(rotate_about_center(e, support.normal, yaw)))
                                    : Eigen::VectorXd::Constant(1, yaw);
      const auto c = cost_at(x);
      if (c && *c < start_cost) {
        start = x;
        start_cost = *c;
      }
    }
  }

  if (!std::isfinite(start_cost)) {
    out.report.status = "no valid samples";
    return out;
  }
  out.refined = true;

  const LMResult run = lm_minimize(residual, start, cfg);
  out.report = run.report;
  Eigen::VectorXd best = start;
  double best_cost = start_cost;
  if (run.x.allFinite()) {
    // LM may drift into a region where the samples are invalid and the
    // residual is trivially zero; judge the result by the guarded cost.
    const auto c = cost_at(run.x);
    if (c && *c < best_cost) {
      best = run.x;
      best_cost = *c;
    }
  }
  out.report.final_cost = best_cost;
  if (!c0 || best_cost < out.initial_cost) {
    out.ellipsoid = make(best);
    out.final_cost = best_cost;
  }
  return out;
}

}  // namespace objslam
