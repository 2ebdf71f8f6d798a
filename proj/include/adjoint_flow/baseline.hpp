#pragma once

// Offline adjoint descent: each iteration solves the forward and adjoint
// problems to convergence, then takes one gradient step.

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "adjoint_flow/errors.hpp"
#include "adjoint_flow/krylov.hpp"
#include "adjoint_flow/objective.hpp"
#include "adjoint_flow/online.hpp"
#include "adjoint_flow/schedule.hpp"
#include "adjoint_flow/trace.hpp"

namespace adjoint_flow {

struct OfflineRunConfig {
  ThetaVector theta0;
  std::size_t iterations = 100;
  /// Constant step; ignored when `schedule` is set.
  double step = 0.0;
  /// Optional step schedule alpha_k = schedule(k).
  std::optional<Schedule> schedule;
  std::optional<std::vector<double>> theta_star;
};

inline TraceRecord run_offline(const LinearProblem& problem, const OfflineRunConfig& cfg) {
  if (!cfg.schedule && !(cfg.step > 0.0)) throw Error("offline run needs a positive step or a schedule");
  TraceRecord trace;
  trace.theta_dim = cfg.theta0.size();
  trace.has_inner_iters = true;
  ThetaVector theta = cfg.theta0;
  double cum = 0.0;
  for (std::size_t k = 0; k <= cfg.iterations; ++k) {
    const ObjectiveEvaluation ev = evaluate_objective(problem, theta, true);
    cum += static_cast<double>(ev.inner_iterations);
    const double step = cfg.schedule ? (*cfg.schedule)(static_cast<double>(k)) : cfg.step;
    TraceRow r;
    r.t = static_cast<double>(k);
    r.J = ev.value;
    r.grad_norm = krylov::norm(ev.gradient);
    r.theta = theta.values;
    r.theta_err = cfg.theta_star ? theta_distance(theta.values, *cfg.theta_star) : std::nan("");
    r.alpha = step;
    r.sup_norm = norm_l2(ev.u_star) + norm_l2(ev.u_hat_star) + theta.norm();
    r.cum_inner_iters = cum;
    trace.rows.push_back(r);
    if (k == cfg.iterations) break;
    for (std::size_t i = 0; i < theta.size(); ++i) theta.values[i] -= step * ev.gradient[i];
    bool finite = true;
    for (double v : theta.values) finite = finite && std::isfinite(v);
    if (!finite) throw DivergedRun(DivergenceError("non-finite parameters in offline descent", k + 1), trace);
  }
  return trace;
}

/// First logged row where `column` drops to or below `threshold`.
inline std::optional<std::size_t> first_row_below(const TraceRecord& trace, const std::string& column, double threshold) {
  const std::vector<double> v = trace.column(column);
  for (std::size_t k = 0; k < v.size(); ++k)
    if (v[k] <= threshold) return k;
  return std::nullopt;
}

}  // namespace adjoint_flow
