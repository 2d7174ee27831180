#include <algorithm>
#include <cmath>

#include "objslam/solver.hpp"

namespace objslam {

bool LMConfig::valid() const {
  return max_iterations > 0 && initial_lambda > 0 && lambda_up > 1.0 && lambda_down > 0 &&
         lambda_down < 1.0 && cost_tolerance > 0 && step_tolerance > 0 && fd_step > 0;
}

void LeastSquaresProblem::jacobian(const Eigen::VectorXd& x, double rel_step, Eigen::MatrixXd& j) const {
  const Eigen::Index n = num_parameters();
  j.resize(num_residuals(), n);
  Eigen::VectorXd xp = x;
  Eigen::VectorXd rp, rm;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double h = rel_step * std::max(1.0, std::abs(x(k)));
    xp(k) = x(k) + h;
    residuals(xp, rp);
    xp(k) = x(k) - h;
    residuals(xp, rm);
    xp(k) = x(k);
    j.col(k) = (rp - rm) / (2.0 * h);
  }
}

namespace {

class FunctionProblem final : public LeastSquaresProblem {
 public:
  FunctionProblem(const ResidualFunction& fn, const Eigen::VectorXd& x0)
      : fn_(fn), n_(x0.size()), m_(fn(x0).size()) {}
  Eigen::Index num_parameters() const override { return n_; }
  Eigen::Index num_residuals() const override { return m_; }
  void residuals(const Eigen::VectorXd& x, Eigen::VectorXd& r) const override { r = fn_(x); }

 private:
  const ResidualFunction& fn_;
  Eigen::Index n_;
  Eigen::Index m_;
};

constexpr double kMaxLambda = 1e16;

}  // namespace

LMResult lm_minimize(const LeastSquaresProblem& problem, const Eigen::VectorXd& x0, const LMConfig& cfg) {
  if (!cfg.valid()) throw PreconditionError("invalid LM configuration");
  LMResult out{x0, {}};
  SolveReport& rep = out.report;

  Eigen::VectorXd r;
  problem.residuals(x0, r);
  if (!r.allFinite()) {
    rep.status = "non-finite residual";
    return out;
  }
  double cost = 0.5 * r.squaredNorm();
  rep.initial_cost = rep.final_cost = cost;
  rep.cost_trace.push_back(cost);

  Eigen::VectorXd& x = out.x;
  double lambda = cfg.initial_lambda;
  Eigen::MatrixXd jac;
  Eigen::VectorXd r_new;
  bool done = false;
  rep.status = "max iterations";

  while (!done && rep.iterations < cfg.max_iterations) {
    ++rep.iterations;
    if (cost <= 1e-30) {
      rep.converged = true;
      rep.status = "zero cost";
      break;
    }
    problem.jacobian(x, cfg.fd_step, jac);
    const Eigen::VectorXd g = jac.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() <= cfg.gradient_tolerance) {
      rep.converged = true;
      rep.status = "gradient tolerance";
      break;
    }
    const Eigen::MatrixXd a = jac.transpose() * jac;
    const double diag_floor = 1e-12 * std::max(1.0, a.diagonal().maxCoeff());
    const Eigen::VectorXd diag = a.diagonal().cwiseMax(diag_floor);

    while (true) {
      Eigen::MatrixXd damped = a;
      damped.diagonal() += lambda * diag;
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
      Eigen::VectorXd step;
      if (ldlt.info() == Eigen::Success) step = ldlt.solve(-g);
      if (step.size() == 0 || !step.allFinite()) {
        lambda *= cfg.lambda_up;
        if (lambda > kMaxLambda) {
          rep.converged = true;
          rep.status = "damping limit";
          done = true;
          break;
        }
        continue;
      }
      if (step.norm() <= cfg.step_tolerance * (x.norm() + cfg.step_tolerance)) {
        rep.converged = true;
        rep.status = "step tolerance";
        done = true;
        break;
      }
      const Eigen::VectorXd x_new = x + step;
      problem.residuals(x_new, r_new);
      const double cost_new = r_new.allFinite() ? 0.5 * r_new.squaredNorm() : INFINITY;
      if (cost_new < cost) {
        const double rel = (cost - cost_new) / std::max(cost, 1e-300);
        x = x_new;
        r = r_new;
        cost = cost_new;
        rep.cost_trace.push_back(cost);
        ++rep.accepted_steps;
        lambda = std::max(lambda * cfg.lambda_down, 1e-15);
        if (rel < cfg.cost_tolerance) {
          rep.converged = true;
          rep.status = "cost tolerance";
          done = true;
        }
        break;
      }
      lambda *= cfg.lambda_up;
      if (lambda > kMaxLambda) {
        rep.converged = true;
        rep.status = "damping limit";
        done = true;
        break;
      }
    }
  }
  rep.final_cost = cost;
  return out;
}

LMResult lm_minimize(const ResidualFunction& fn, const Eigen::VectorXd& x0, const LMConfig& cfg) {
  const FunctionProblem problem(fn, x0);
  return lm_minimize(problem, x0, cfg);
}

}  // namespace objslam
