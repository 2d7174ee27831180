#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "objslam/factors.hpp"
#include "objslam/geometry.hpp"
#include "objslam/symmetry.hpp"

namespace objslam {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LMConfig {
  int max_iterations = 100;
  double initial_lambda = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 0.3;
  /// Relative cost decrease below which an accepted step ends the solve.
  double cost_tolerance = 1e-10;
  double step_tolerance = 1e-12;
  double gradient_tolerance = 1e-14;
  /// Central-difference step relative to max(1, |x_i|).
  double fd_step = 1e-6;

  bool valid() const;
};

struct SolveReport {
  bool converged = false;
  int iterations = 0;
  int accepted_steps = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  /// Cost at the start and after every accepted step.
  std::vector<double> cost_trace;
  std::string status;
};

/// Nonlinear least squares: minimize 0.5 |r(x)|^2.
class LeastSquaresProblem {
 public:
  virtual ~LeastSquaresProblem() = default;
  virtual Eigen::Index num_parameters() const = 0;
  virtual Eigen::Index num_residuals() const = 0;
  virtual void residuals(const Eigen::VectorXd& x, Eigen::VectorXd& r) const = 0;
  /// Dense central differences unless overridden.
  virtual void jacobian(const Eigen::VectorXd& x, double rel_step, Eigen::MatrixXd& j) const;
};

using ResidualFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LMResult {
  Eigen::VectorXd x;
  SolveReport report;
};

/// Levenberg-Marquardt with damping lambda * diag(J^T J). A step is accepted
/// only when it lowers the cost. Returns the start point with status
/// "non-finite residual" when r(x0) is not finite.
LMResult lm_minimize(const LeastSquaresProblem& problem, const Eigen::VectorXd& x0, const LMConfig& cfg);
LMResult lm_minimize(const ResidualFunction& fn, const Eigen::VectorXd& x0, const LMConfig& cfg);

using EllipsoidParams = Eigen::Matrix<double, 9, 1>;
using PoseParams = Eigen::Matrix<double, 6, 1>;

double wrap_angle(double a);

/// (center, yaw, pitch, roll, log half-axes); angles wrapped to (-pi, pi].
EllipsoidParams ellipsoid_to_params(const Ellipsoid& e);
Ellipsoid params_to_ellipsoid(const Eigen::Ref<const Eigen::VectorXd>& x, const std::string& label = {});
/// (axis-angle, translation).
PoseParams pose_to_params(const Pose& pose);
Pose params_to_pose(const Eigen::Ref<const Eigen::VectorXd>& x);

/// Rotation whose Z axis is `normal` and whose X axis is `forward` projected
/// onto the plane orthogonal to it.
Mat3 frame_on_plane(const Vec3& normal, const Vec3& forward);

struct InitOptions {
  UnknownLabelPolicy unknown_label = UnknownLabelPolicy::Skip;
  /// Yaw seeds spread evenly over [0, 180) degrees; the lowest final cost wins.
  int yaw_seeds = 4;
  /// Drop f_sup from the cost (ablation). The plane still seeds the solve.
  bool use_support = true;
};

struct InitCandidate {
  Ellipsoid ellipsoid;
  double cost = 0.0;
};

struct InitResult {
  Ellipsoid ellipsoid;  // lowest-cost candidate
  SolveReport report;
  double seed_cost = 0.0;
  /// Distinct converged solutions (yaw differing by more than 2 degrees
  /// modulo 180), cheapest first. A box, a plane and a ratio prior generally
  /// admit a mirrored solution that only texture can tell apart.
  std::vector<InitCandidate> candidates;
};

/// Single-frame estimate minimizing f_bbox + f_sup + f_ssc over 9 DoF.
/// Throws PreconditionError for a degenerate bbox or a camera below the plane
/// and SolverError("initialization diverged") when the solve fails.
InitResult init_single_frame(const BBox& b, const Plane& plane, const std::string& label,
                             const ScaleRatioTable& table, const ProjectionMatrix& p,
                             const NoiseModel& noise, const LMConfig& cfg, const InitOptions& opts = {});

struct RefineOptions {
  SymmetryOptions symmetry;
  /// Also free the other 8 DoF (off by default).
  bool full_dof = false;
  /// Coarse yaw scan over [-scan_range_deg, scan_range_deg] around the start
  /// before the LM polish; 0 disables it.
  double scan_range_deg = 45.0;
  double scan_step_deg = 3.0;
};

struct RefineResult {
  Ellipsoid ellipsoid;
  bool refined = false;  // false when no scanned yaw had valid samples
  /// NaN when the start itself has too few valid samples.
  double initial_cost = 0.0;
  double final_cost = 0.0;
  SolveReport report;
};

/// Yaw refinement about the plane normal minimizing f_sym + f_sup: a coarse
/// yaw scan followed by LM. Keeps the lower-cost of the initial and refined
/// yaw.
RefineResult refine_orientation(const Ellipsoid& e, const SampleSet& samples, const DistanceField& field,
                                const ProjectionMatrix& p, const Plane& plane, const NoiseModel& noise,
                                const LMConfig& cfg, const RefineOptions& opts = {});

struct MapSolveResult {
  FactorGraph graph;
  SolveReport report;
};

/// Joint LM over all poses and objects minimizing graph_total_cost. The pose
/// with the smallest frame id is held fixed.
MapSolveResult optimize_map(const FactorGraph& g, const NoiseModel& noise, const LMConfig& cfg);

}  // namespace objslam
