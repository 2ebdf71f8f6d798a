#pragma once

// J(theta) = 1/2 <u* - h, u* - h> + gamma/2 |theta|^2 with A u* = f(., theta),
// its adjoint gradient <u_hat*, grad_theta f> + gamma theta where
// A^T u_hat* = u* - h, and a central-difference oracle.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "adjoint_flow/elliptic.hpp"
#include "adjoint_flow/errors.hpp"
#include "adjoint_flow/linsolve.hpp"
#include "adjoint_flow/mesh.hpp"
#include "adjoint_flow/source.hpp"

namespace adjoint_flow {

struct ThetaVector {
  std::vector<double> values;
  double gamma = 0.0;

  ThetaVector() = default;
  ThetaVector(std::vector<double> v, double g) : values(std::move(v)), gamma(g) { validate(); }

  std::size_t size() const noexcept { return values.size(); }
  double norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
  }
  void validate() const {
    if (!(gamma >= 0.0)) throw Error("regularization weight gamma must be >= 0");
    for (double v : values)
      if (!std::isfinite(v)) throw Error("parameter vector has a non-finite entry");
  }
};

struct TargetProfile {
  Field h;
};

/// Operator, its transpose, the source model and the target, bundled so the
/// transpose is formed once.
struct LinearProblem {
  DiscreteOperator op;
  DiscreteOperator op_adj;
  std::shared_ptr<const SourceModel> model;
  TargetProfile target;
  SolverConfig solver;

  LinearProblem(DiscreteOperator a, std::shared_ptr<const SourceModel> m, TargetProfile h, SolverConfig cfg = {})
      : op(std::move(a)), op_adj(adjoint(op)), model(std::move(m)), target(std::move(h)), solver(cfg) {
    if (!model) throw Error("linear problem needs a source model");
    if (!(target.h.grid() == op.grid())) throw ConformabilityError("target profile is not on the operator's grid");
  }

  const Grid& grid() const noexcept { return op.grid(); }
};

struct ObjectiveEvaluation {
  double value = 0.0;
  std::vector<double> gradient;
  Field u_star;
  Field u_hat_star;
  std::size_t inner_iterations = 0;
};

/// Solves the forward problem and, if requested, the adjoint problem.
inline ObjectiveEvaluation evaluate_objective(const LinearProblem& p, const ThetaVector& theta, bool with_gradient = true) {
  require_dim(*p.model, theta.values);
  ObjectiveEvaluation ev;
  const Field f = eval_field(*p.model, p.grid(), theta.values);
  SolveReport fwd = solve_steady_report(p.op, f, p.solver);
  ev.inner_iterations += fwd.iterations;
  ev.u_star = std::move(fwd.solution);
  Field mismatch = ev.u_star - p.target.h;
  mismatch.zero_boundary();
  ev.value = 0.5 * inner_product(mismatch, mismatch) + 0.5 * theta.gamma * theta.norm() * theta.norm();
  if (!with_gradient) return ev;

  SolveReport adj = solve_steady_report(p.op_adj, mismatch, p.solver);
  ev.inner_iterations += adj.iterations;
  ev.u_hat_star = std::move(adj.solution);
  const std::vector<Field> df = grad_field(*p.model, p.grid(), theta.values);
  ev.gradient.resize(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k)
    ev.gradient[k] = inner_product(ev.u_hat_star, df[k]) + theta.gamma * theta.values[k];
  return ev;
}

inline double objective_value(const LinearProblem& p, const ThetaVector& theta) {
  return evaluate_objective(p, theta, false).value;
}

inline std::vector<double> adjoint_gradient(const LinearProblem& p, const ThetaVector& theta) {
  return evaluate_objective(p, theta, true).gradient;
}

inline std::vector<double> fd_gradient(const LinearProblem& p, const ThetaVector& theta, double step = 1e-5) {
  if (!(step > 0.0)) throw Error("finite-difference step must be positive");
  std::vector<double> g(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    ThetaVector tp = theta, tm = theta;
    tp.values[k] += step;
    tm.values[k] -= step;
    g[k] = (objective_value(p, tp) - objective_value(p, tm)) / (2.0 * step);
  }
  return g;
}

inline double relative_l2_error(const std::vector<double>& a, const std::vector<double>& ref) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    num += (a[k] - ref[k]) * (a[k] - ref[k]);
    den += ref[k] * ref[k];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

/// Hessian by central differences of the adjoint gradient, symmetrized.
inline Eigen::MatrixXd fd_hessian(const LinearProblem& p, const ThetaVector& theta, double step = 1e-4) {
  const std::size_t d = theta.size();
  Eigen::MatrixXd h(d, d);
  for (std::size_t k = 0; k < d; ++k) {
    ThetaVector tp = theta, tm = theta;
    tp.values[k] += step;
    tm.values[k] -= step;
    const std::vector<double> gp = adjoint_gradient(p, tp), gm = adjoint_gradient(p, tm);
    for (std::size_t i = 0; i < d; ++i) h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = (gp[i] - gm[i]) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

/// Minimizer and curvature of J for a source that is linear in theta.
struct QuadraticReference {
  std::vector<double> theta_star;
  Eigen::MatrixXd hessian;
  double q = 0.0;  ///< smallest Hessian eigenvalue
  double L = 0.0;  ///< largest Hessian eigenvalue
};

/// Exact for LinearBasisSource: with G_k = A^{-1} phi_k the Hessian is the
/// Gram matrix <G_j, G_k> + gamma I and theta* solves H theta* = (<G_k, h>).
inline QuadraticReference quadratic_reference(const LinearProblem& p, double gamma) {
  if (!p.model->gradient_is_constant()) throw Error("quadratic reference needs a source that is linear in theta");
  const std::size_t d = p.model->dim();
  const std::vector<double> zero(d, 0.0);
  const std::vector<Field> basis = grad_field(*p.model, p.grid(), zero);
  std::vector<Field> g;
  g.reserve(d);
  for (const Field& phi : basis) g.push_back(solve_steady(p.op, phi, p.solver));
  Field h = p.target.h;
  h.zero_boundary();
  Eigen::MatrixXd hess(d, d);
  Eigen::VectorXd rhs(d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    rhs(jj) = inner_product(g[j], h);
    for (std::size_t k = 0; k < d; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      hess(jj, kk) = inner_product(g[j], g[k]) + (j == k ? gamma : 0.0);
    }
  }
  QuadraticReference ref;
  ref.hessian = hess;
  const Eigen::VectorXd ts = hess.ldlt().solve(rhs);
  ref.theta_star.assign(ts.data(), ts.data() + d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
  ref.q = es.eigenvalues().minCoeff();
  ref.L = es.eigenvalues().maxCoeff();
  return ref;
}

}  // namespace adjoint_flow
