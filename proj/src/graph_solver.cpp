#include <cmath>
#include <vector>

#include "objslam/solver.hpp"

namespace objslam {

namespace {

enum class Kind { Observation, Odometry, Support, Scale, Symmetry };

struct Block {
  Kind kind;
  std::size_t index;  // into the per-kind vector
  int frame_a = -1;
  int frame_b = -1;
  int object = -1;
  Eigen::Index row = 0;
  Eigen::Index rows = 0;
};

/// Dense layout: free poses first (6 each), then objects (9 each).
class GraphProblem final : public LeastSquaresProblem {
 public:
  GraphProblem(const FactorGraph& g, const NoiseModel& noise) : g_(g), noise_(noise) {
    fixed_frame_ = g.poses.empty() ? -1 : g.poses.begin()->first;
    Eigen::Index col = 0;
    for (const auto& [id, pose] : g.poses) {
      if (id == fixed_frame_) continue;
      pose_col_[id] = col;
      col += 6;
    }
    for (const auto& [id, obj] : g.objects) {
      object_col_[id] = col;
      col += 9;
    }
    n_ = col;

    Eigen::Index row = 0;
    auto add = [&](Kind k, std::size_t i, int fa, int fb, int obj, Eigen::Index rows) {
      blocks_.push_back({k, i, fa, fb, obj, row, rows});
      row += rows;
    };
    for (std::size_t i = 0; i < g.observations.size(); ++i) {
      add(Kind::Observation, i, g.observations[i].frame_id, -1, g.observations[i].object_id, 4);
    }
    for (std::size_t i = 0; i < g.odometry.size(); ++i) {
      add(Kind::Odometry, i, g.odometry[i].frame_i, g.odometry[i].frame_j, -1, 6);
    }
    for (std::size_t i = 0; i < g.supports.size(); ++i) add(Kind::Support, i, -1, -1, g.supports[i].object_id, 3);
    for (std::size_t i = 0; i < g.scales.size(); ++i) add(Kind::Scale, i, -1, -1, g.scales[i].object_id, 2);
    for (std::size_t i = 0; i < g.symmetries.size(); ++i) {
      const auto& f = g.symmetries[i];
      add(Kind::Symmetry, i, f.frame_id, -1, f.object_id, static_cast<Eigen::Index>(f.data->samples.size()));
    }
    m_ = row;
  }

  Eigen::Index num_parameters() const override { return n_; }
  Eigen::Index num_residuals() const override { return m_; }

  Eigen::VectorXd initial() const {
    Eigen::VectorXd x(n_);
    for (const auto& [id, col] : pose_col_) x.segment<6>(col) = pose_to_params(g_.poses.at(id));
    for (const auto& [id, col] : object_col_) x.segment<9>(col) = ellipsoid_to_params(g_.objects.at(id));
    return x;
  }

  Pose pose(const Eigen::VectorXd& x, int id) const {
    const auto it = pose_col_.find(id);
    if (it == pose_col_.end()) return g_.poses.at(id);
    return params_to_pose(x.segment<6>(it->second));
  }

  Ellipsoid object(const Eigen::VectorXd& x, int id) const {
    const Ellipsoid& ref = g_.objects.at(id);
    Ellipsoid e = params_to_ellipsoid(x.segment<9>(object_col_.at(id)), ref.label);
    e.symmetry_axis_fixed = ref.symmetry_axis_fixed;
    return e;
  }

  void residuals(const Eigen::VectorXd& x, Eigen::VectorXd& r) const override {
    r.resize(m_);
    const auto nb = static_cast<std::ptrdiff_t>(blocks_.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t b = 0; b < nb; ++b) {
      const Block& blk = blocks_[b];
      r.segment(blk.row, blk.rows) = robust(evaluate(blk, node_state(x, blk)));
    }
  }

  /// Each factor differentiates only its own parameter blocks and writes only
  /// its own rows, so factors are processed in parallel.
  void jacobian(const Eigen::VectorXd& x, double rel_step, Eigen::MatrixXd& j) const override {
    j.setZero(m_, n_);
    const auto nb = static_cast<std::ptrdiff_t>(blocks_.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t b = 0; b < nb; ++b) {
      const Block& blk = blocks_[b];
      std::vector<Eigen::Index> cols;
      for (int f : {blk.frame_a, blk.frame_b}) {
        if (f < 0) continue;
        const auto it = pose_col_.find(f);
        if (it != pose_col_.end()) {
          for (int k = 0; k < 6; ++k) cols.push_back(it->second + k);
        }
      }
      if (blk.object >= 0) {
        const Eigen::Index c = object_col_.at(blk.object);
        for (int k = 0; k < 9; ++k) cols.push_back(c + k);
      }
      Eigen::VectorXd xp = x;
      for (Eigen::Index c : cols) {
        const double h = rel_step * std::max(1.0, std::abs(x(c)));
        xp(c) = x(c) + h;
        const Eigen::VectorXd rp = robust(evaluate(blk, node_state(xp, blk)));
        xp(c) = x(c) - h;
        const Eigen::VectorXd rm = robust(evaluate(blk, node_state(xp, blk)));
        xp(c) = x(c);
        j.block(blk.row, c, blk.rows, 1) = (rp - rm) / (2.0 * h);
      }
    }
  }

  FactorGraph decode(const Eigen::VectorXd& x) const {
    FactorGraph out = g_;
    for (auto& [id, pose] : out.poses) pose = this->pose(x, id);
    for (auto& [id, obj] : out.objects) obj = object(x, id);
    return out;
  }

 private:
  struct NodeState {
    Pose a;
    Pose b;
    Ellipsoid object;
  };

  NodeState node_state(const Eigen::VectorXd& x, const Block& blk) const {
    NodeState s;
    if (blk.frame_a >= 0) s.a = pose(x, blk.frame_a);
    if (blk.frame_b >= 0) s.b = pose(x, blk.frame_b);
    if (blk.object >= 0) s.object = object(x, blk.object);
    return s;
  }

  Eigen::VectorXd evaluate(const Block& blk, const NodeState& s) const {
    switch (blk.kind) {
      case Kind::Observation:
        return bbox_residual(s.object, g_.observations[blk.index].bbox, compose_projection(s.a, g_.intrinsics),
                             noise_);
      case Kind::Odometry:
        return odometry_residual(s.a, s.b, g_.odometry[blk.index].measured, noise_);
      case Kind::Support:
        return support_residual(s.object, g_.supports[blk.index].plane, noise_);
      case Kind::Scale:
        return ssc_residual(s.object, g_.scales[blk.index].prior, noise_);
      case Kind::Symmetry: {
        const auto& f = g_.symmetries[blk.index];
        SymmetryOptions opts = g_.symmetry_options;
        opts.sigma_sym = noise_.sigma_sym;
        Eigen::VectorXd r(blk.rows);
        symmetry_residuals(s.object, f.data->samples, *f.data->field, compose_projection(s.a, g_.intrinsics),
                           opts, r);
        return r;
      }
    }
    return {};
  }

  /// Scales r so that 0.5 |r'|^2 == huber(|r|).
  Eigen::VectorXd robust(const Eigen::VectorXd& r) const {
    const double e = r.norm();
    if (!(e > 0.0) || !std::isfinite(e)) return r;
    return r * (std::sqrt(2.0 * huber(e, noise_.huber_delta)) / e);
  }

  const FactorGraph& g_;
  const NoiseModel& noise_;
  int fixed_frame_ = -1;
  std::map<int, Eigen::Index> pose_col_;
  std::map<int, Eigen::Index> object_col_;
  std::vector<Block> blocks_;
  Eigen::Index n_ = 0;
  Eigen::Index m_ = 0;
};

}  // namespace

MapSolveResult optimize_map(const FactorGraph& g, const NoiseModel& noise, const LMConfig& cfg) {
  g.validate();
  if (!noise.valid()) throw PreconditionError("noise model has a non-positive sigma");
  const GraphProblem problem(g, noise);
  if (problem.num_parameters() == 0 || problem.num_residuals() == 0) {
    const double c = graph_total_cost(g, noise);
    SolveReport rep;
    rep.converged = true;
    rep.status = "nothing to optimize";
    rep.initial_cost = rep.final_cost = c;
    rep.cost_trace = {c};
    return {g, rep};
  }
  const LMResult run = lm_minimize(problem, problem.initial(), cfg);
  if (run.report.status == "non-finite residual") throw SolverError("map cost is not finite at the start");
  return {problem.decode(run.x), run.report};
}

}  // namespace objslam
