#pragma once

// Steady solves A u = rhs with homogeneous Dirichlet data.

#include <cstddef>
#include <string>

#include "adjoint_flow/elliptic.hpp"
#include "adjoint_flow/errors.hpp"
#include "adjoint_flow/krylov.hpp"
#include "adjoint_flow/mesh.hpp"

namespace adjoint_flow {

enum class SolverMethod { automatic, conjugate_gradient, bicgstab };

struct SolverConfig {
  SolverMethod method = SolverMethod::automatic;
  double tol = 1e-10;
  /// 0 means 10 * (number of interior unknowns).
  std::size_t max_iter = 0;
  bool jacobi = false;

  void validate() const {
    if (!(tol > 0.0 && tol < 1.0)) throw Error("solver tol must lie in (0, 1)");
  }
};

inline SolverMethod parse_solver_method(const std::string& s) {
  if (s == "auto") return SolverMethod::automatic;
  if (s == "cg" || s == "conjugate-gradient") return SolverMethod::conjugate_gradient;
  if (s == "bicgstab") return SolverMethod::bicgstab;
  throw ConfigError("unknown solver method '" + s + "'");
}

struct SolveReport {
  Field solution;
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  SolverMethod method = SolverMethod::automatic;
};

/// Solves op * u = rhs (interior rows) from a zero initial guess. The
/// boundary values of rhs are ignored. Throws NonConvergenceError rather
/// than returning an inaccurate answer.
inline SolveReport solve_steady_report(const DiscreteOperator& op, const Field& rhs, const SolverConfig& cfg = {}) {
  cfg.validate();
  if (!(rhs.grid() == op.grid())) throw ConformabilityError("rhs and operator live on different grids");
  SolveReport rep;
  rep.solution = Field(op.grid());
  std::vector<double> b = rhs.values();
  for (std::size_t k = 0; k < b.size(); ++k)
    if (op.grid().is_boundary(k)) b[k] = 0.0;
  if (krylov::norm(b) == 0.0) return rep;

  SolverMethod method = cfg.method;
  if (method == SolverMethod::automatic)
    method = op.is_symmetric() ? SolverMethod::conjugate_gradient : SolverMethod::bicgstab;
  if (method == SolverMethod::conjugate_gradient && !op.is_symmetric())
    throw Error("conjugate gradients requested for a non-symmetric operator");
  rep.method = method;

  const std::size_t max_iter = cfg.max_iter ? cfg.max_iter : 10 * op.grid().interior_count();
  const std::vector<double> inv_diag = cfg.jacobi ? op.inverse_diagonal() : std::vector<double>{};
  auto mv = [&op](const std::vector<double>& x, std::vector<double>& y) { op.apply_raw(x, y); };
  std::vector<double>& x = rep.solution.values();

  krylov::Result r;
  if (method == SolverMethod::conjugate_gradient) {
    r = krylov::cg(mv, b, x, cfg.tol, max_iter, inv_diag);
    rep.iterations = r.iterations;
    if (r.indefinite) throw Error("conjugate gradients met non-positive curvature; operator is not coercive");
  } else {
    // Restart on a stalled recurrence while budget remains.
    while (true) {
      r = krylov::bicgstab(mv, b, x, cfg.tol, max_iter - rep.iterations, inv_diag);
      rep.iterations += r.iterations;
      if (r.converged || rep.iterations >= max_iter || r.iterations == 0) break;
    }
  }
  rep.relative_residual = r.relative_residual;
  if (!r.converged) throw NonConvergenceError("steady solve did not converge", r.relative_residual, rep.iterations);
  return rep;
}

inline Field solve_steady(const DiscreteOperator& op, const Field& rhs, const SolverConfig& cfg = {}) {
  return solve_steady_report(op, rhs, cfg).solution;
}

/// Solves op * u = rhs where the boundary values of `boundary_data` are
/// Dirichlet data: returns u with those boundary values and interior
/// values satisfying the discrete equations.
inline Field solve_steady_with_boundary(const DiscreteOperator& op, const Field& rhs, const Field& boundary_data,
                                        const SolverConfig& cfg = {}) {
  boundary_data.require_conformable(rhs);
  Field lifted(op.grid());
  op.add_boundary_raw(boundary_data.values(), lifted.values());
  Field shifted = rhs;
  shifted -= lifted;
  Field u = solve_steady(op, shifted, cfg);
  for (std::size_t k = 0; k < u.size(); ++k)
    if (op.grid().is_boundary(k)) u[k] = boundary_data[k];
  return u;
}

}  // namespace adjoint_flow
