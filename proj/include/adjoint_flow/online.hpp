#pragma once

// The online adjoint algorithm: explicit Euler on the coupled system
//   du/dt     = -A u + f(., theta)
//   du_hat/dt = -A^T u_hat + (u - h)
//   dtheta/dt = -alpha(t) (<u_hat, grad_theta f(., theta)> + gamma theta)
// with homogeneous Dirichlet data on u and u_hat.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adjoint_flow/elliptic.hpp"
#include "adjoint_flow/errors.hpp"
#include "adjoint_flow/krylov.hpp"
#include "adjoint_flow/mesh.hpp"
#include "adjoint_flow/objective.hpp"
#include "adjoint_flow/schedule.hpp"
#include "adjoint_flow/source.hpp"
#include "adjoint_flow/trace.hpp"

namespace adjoint_flow {

/// Largest eigenvalue of the symmetric part by Lanczos with full
/// reorthogonalization, never above its Gershgorin bound.
inline double symmetric_spectral_radius(const DiscreteOperator& op, double tol = 1e-10, std::size_t max_iter = 600) {
  const DiscreteOperator sym = op.is_symmetric() ? op : symmetric_part(op);
  const std::size_t n_dof = op.grid().interior_count();
  if (n_dof == 0) return 0.0;
  const std::size_t m_max = std::min(max_iter, n_dof);
  std::vector<std::vector<double>> q{detail::start_vector(op.grid(), 11)};
  const double n0 = krylov::norm(q[0]);
  for (double& v : q[0]) v /= n0;
  std::vector<double> alpha, beta, w;
  double theta = 0.0, theta_prev = 0.0;
  for (std::size_t j = 0; j < m_max; ++j) {
    sym.apply_raw(q[j], w);
    alpha.push_back(krylov::dot(q[j], w));
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& qi : q) {
        const double c = krylov::dot(qi, w);
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= c * qi[k];
      }
    const double b = krylov::norm(w);

    const auto m = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      t(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    theta = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(t, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    const bool invariant = b <= 1e-14 * std::abs(theta);
    if (invariant || (j > 2 && std::abs(theta - theta_prev) <= tol * std::abs(theta))) break;
    if (j + 1 == m_max)
      throw NonConvergenceError("Lanczos iteration for the spectral radius did not converge", std::abs(theta - theta_prev), j + 1);
    theta_prev = theta;
    beta.push_back(b);
    for (double& v : w) v /= b;
    q.push_back(w);
  }
  return std::min(std::abs(theta), sym.gershgorin());
}

/// Stability limit 2 / rho for explicit Euler on du/dt = -A u. rho combines
/// the symmetric-part spectral radius with a Gershgorin bound on the skew
/// (advective) part as sqrt(rho_sym^2 + rho_skew^2).
inline double cfl_bound(const DiscreteOperator& op) {
  const double rho_sym = symmetric_spectral_radius(op);
  const double rho_skew = op.is_symmetric() ? 0.0 : skew_part(op).gershgorin();
  const double rho = std::hypot(rho_sym, rho_skew);
  if (!(rho > 0.0)) throw Error("operator has zero spectral radius");
  return 2.0 / rho;
}

struct StepSize {
  double delta = 0.0;
  double cfl_bound = 0.0;
  std::string warning;
};

inline constexpr double kDefaultCflSafety = 0.9;

/// requested <= 0 picks safety * bound. A larger request throws unless
/// allow_unstable is set, in which case a warning is recorded.
inline StepSize make_step_size(const DiscreteOperator& op, double requested = 0.0, double safety = kDefaultCflSafety,
                               bool allow_unstable = false) {
  StepSize s;
  s.cfl_bound = cfl_bound(op);
  if (requested <= 0.0) {
    s.delta = safety * s.cfl_bound;
    return s;
  }
  s.delta = requested;
  if (requested > safety * s.cfl_bound) {
    const std::string msg = "time step " + format_number(requested) + " exceeds " + format_number(safety) +
                            " x CFL bound " + format_number(s.cfl_bound);
    if (!allow_unstable) throw StabilityError(msg);
    s.warning = msg;
  }
  return s;
}

struct OnlineState {
  double t = 0.0;
  Field u;
  Field u_hat;
  ThetaVector theta;
  std::size_t step_count = 0;

  static OnlineState initial(const Grid& grid, ThetaVector theta0) {
    return {0.0, Field(grid), Field(grid), std::move(theta0), 0};
  }
};

enum class UpdateOrder {
  /// All three updates read the state at time t.
  simultaneous,
  /// u first, then u_hat from the new u, then theta from the new u_hat.
  sequential,
};

/// Advances an OnlineState in place. Holds work buffers so a long run does
/// not allocate per step.
class OnlineIntegrator {
 public:
  OnlineIntegrator(const LinearProblem& problem, Schedule schedule, StepSize dt,
                   UpdateOrder order = UpdateOrder::simultaneous)
      : p_(problem), sched_(std::move(schedule)), dt_(dt), order_(order) {
    sched_.validate();
    if (!(dt_.delta > 0.0)) throw Error("time step must be positive");
    const Grid& g = p_.grid();
    weights_.resize(g.node_count());
    interior_.assign(g.node_count(), 0);
    for (std::size_t k = 0; k < g.node_count(); ++k) {
      weights_[k] = g.weight(k);
      interior_[k] = g.is_boundary(k) ? 0 : 1;
    }
    if (p_.model->gradient_is_constant()) {
      basis_ = grad_field(*p_.model, g, std::vector<double>(p_.model->dim(), 0.0));
      weighted_basis_ = basis_;
      for (Field& f : weighted_basis_)
        for (std::size_t k = 0; k < f.size(); ++k) f[k] *= weights_[k];
    }
    h_ = p_.target.h.values();
  }

  const StepSize& step_size() const noexcept { return dt_; }
  const Schedule& schedule() const noexcept { return sched_; }

  void step(OnlineState& s) {
    const std::size_t d = s.theta.size();
    if (d != p_.model->dim()) throw Error("state parameter dimension does not match the model");
    const double delta = dt_.delta;
    const double alpha = sched_(s.t);
    source_values(s.theta.values, f_);

    p_.op.apply_raw(s.u.values(), au_);
    std::vector<double>& u = s.u.values();
    std::vector<double>& uh = s.u_hat.values();
    double check = 0.0;

    if (order_ == UpdateOrder::simultaneous) {
      gradient_estimate(uh, s.theta, grad_);
      p_.op_adj.apply_raw(uh, auh_);
      for (std::size_t k = 0; k < u.size(); ++k) {
        if (!interior_[k]) continue;
        const double uk = u[k];
        u[k] = uk + (-au_[k] + f_[k]) * delta;
        uh[k] = uh[k] + (-auh_[k] + (uk - h_[k])) * delta;
        check += u[k] + uh[k];
      }
    } else {
      for (std::size_t k = 0; k < u.size(); ++k)
        if (interior_[k]) u[k] += (-au_[k] + f_[k]) * delta;
      p_.op_adj.apply_raw(uh, auh_);
      for (std::size_t k = 0; k < u.size(); ++k) {
        if (!interior_[k]) continue;
        uh[k] += (-auh_[k] + (u[k] - h_[k])) * delta;
        check += u[k] + uh[k];
      }
      gradient_estimate(uh, s.theta, grad_);
    }
    for (std::size_t k = 0; k < d; ++k) {
      s.theta.values[k] -= alpha * grad_[k] * delta;
      check += s.theta.values[k];
    }
    ++s.step_count;
    s.t = static_cast<double>(s.step_count) * delta;
    if (!std::isfinite(check)) throw DivergenceError("non-finite value in online state", s.step_count);
  }

  /// <u_hat, grad_theta f(theta)> + gamma theta, trapezoid quadrature.
  void gradient_estimate(const std::vector<double>& uh, const ThetaVector& theta, std::vector<double>& out) {
    const std::size_t d = theta.size();
    out.assign(d, 0.0);
    if (!weighted_basis_.empty()) {
      for (std::size_t i = 0; i < d; ++i) {
        const std::vector<double>& wb = weighted_basis_[i].values();
        double s = 0.0;
        for (std::size_t k = 0; k < uh.size(); ++k) s += wb[k] * uh[k];
        out[i] = s;
      }
    } else {
      const std::vector<Field> df = grad_field(*p_.model, p_.grid(), theta.values);
      for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < uh.size(); ++k) s += weights_[k] * df[i][k] * uh[k];
        out[i] = s;
      }
    }
    for (std::size_t i = 0; i < d; ++i) out[i] += theta.gamma * theta.values[i];
  }

 private:
  void source_values(const std::vector<double>& theta, std::vector<double>& out) {
    if (p_.model->linear_in_theta() && !basis_.empty()) {
      out.assign(basis_.front().size(), 0.0);
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const std::vector<double>& b = basis_[i].values();
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += theta[i] * b[k];
      }
    } else {
      out = eval_field(*p_.model, p_.grid(), theta).values();
    }
  }

  const LinearProblem& p_;
  Schedule sched_;
  StepSize dt_;
  UpdateOrder order_;
  std::vector<double> weights_;
  std::vector<unsigned char> interior_;
  std::vector<Field> basis_, weighted_basis_;
  std::vector<double> h_, f_, au_, auh_, grad_;
};

/// One explicit step, returning the new state.
inline OnlineState online_step(const OnlineState& state, const LinearProblem& problem, const Schedule& sched,
                               const StepSize& dt, UpdateOrder order = UpdateOrder::simultaneous) {
  OnlineIntegrator integ(problem, sched, dt, order);
  OnlineState next = state;
  integ.step(next);
  return next;
}

/// Step indices at which rows are logged: every `stride` steps, or, when
/// per_decade > 0, geometrically spaced (per_decade points per factor 10).
/// Always includes step 0 and the final step.
inline std::vector<std::size_t> log_schedule(std::size_t total_steps, std::size_t stride, std::size_t per_decade) {
  std::vector<std::size_t> out{0};
  if (per_decade > 0) {
    for (std::size_t j = 0;; ++j) {
      const double s = std::ceil(std::pow(10.0, static_cast<double>(j) / static_cast<double>(per_decade)) - 1e-9);
      if (s >= static_cast<double>(total_steps)) break;
      const auto si = static_cast<std::size_t>(s);
      if (si > out.back()) out.push_back(si);
    }
  } else {
    if (stride == 0) throw Error("log stride must be positive");
    for (std::size_t s = stride; s < total_steps; s += stride) out.push_back(s);
  }
  if (total_steps > out.back()) out.push_back(total_steps);
  return out;
}

struct OnlineRunConfig {
  Schedule schedule;
  StepSize dt;
  double horizon = 1.0;
  ThetaVector theta0;
  std::optional<Field> u0;
  std::optional<Field> u_hat0;
  std::size_t log_stride = 100;
  std::size_t log_per_decade = 0;
  std::optional<std::vector<double>> theta_star;
  UpdateOrder order = UpdateOrder::simultaneous;
};

struct OnlineRun {
  TraceRecord trace;
  OnlineState final_state;
};

inline double theta_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

/// Logs one row using full steady solves at theta(t) as oracles for J,
/// grad J, u*(theta(t)) and u_hat*(theta(t)).
inline TraceRow online_trace_row(const LinearProblem& p, const OnlineState& s, const Schedule& sched,
                                 const std::optional<std::vector<double>>& theta_star) {
  const ObjectiveEvaluation ev = evaluate_objective(p, s.theta, true);
  TraceRow r;
  r.t = s.t;
  r.J = ev.value;
  r.grad_norm = krylov::norm(ev.gradient);
  r.theta = s.theta.values;
  r.theta_err = theta_star ? theta_distance(s.theta.values, *theta_star) : std::nan("");
  r.phi_norm = norm_l2(s.u - ev.u_star);
  r.psi_norm = norm_l2(s.u_hat - ev.u_hat_star);
  r.alpha = sched(s.t);
  r.sup_norm = norm_l2(s.u) + norm_l2(s.u_hat) + s.theta.norm();
  return r;
}

/// Integrates to the horizon, logging rows per the configured spacing.
/// Throws DivergedRun carrying the rows logged so far.
inline OnlineRun run_online(const LinearProblem& problem, const OnlineRunConfig& cfg) {
  if (!(cfg.horizon > 0.0)) throw Error("horizon must be positive");
  OnlineIntegrator integ(problem, cfg.schedule, cfg.dt, cfg.order);
  OnlineState state = OnlineState::initial(problem.grid(), cfg.theta0);
  if (cfg.u0) {
    state.u = *cfg.u0;
    state.u.zero_boundary();
  }
  if (cfg.u_hat0) {
    state.u_hat = *cfg.u_hat0;
    state.u_hat.zero_boundary();
  }
  const auto total = static_cast<std::size_t>(std::llround(std::ceil(cfg.horizon / cfg.dt.delta - 1e-9)));
  const std::vector<std::size_t> logs = log_schedule(total, cfg.log_stride, cfg.log_per_decade);

  OnlineRun run;
  run.trace.theta_dim = state.theta.size();
  std::size_t next = 0;
  try {
    while (true) {
      if (next < logs.size() && state.step_count == logs[next]) {
        run.trace.rows.push_back(online_trace_row(problem, state, integ.schedule(), cfg.theta_star));
        ++next;
      }
      if (state.step_count >= total) break;
      integ.step(state);
    }
  } catch (const DivergenceError& e) {
    throw DivergedRun(e, std::move(run.trace));
  }
  run.final_state = std::move(state);
  return run;
}

}  // namespace adjoint_flow
