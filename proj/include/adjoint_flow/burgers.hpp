#pragma once

// Steady viscous Burgers-type equation on the unit square,
//   0 = -theta_1 u u_x - theta_2 u u_y + u_xx + u_yy,
// with u = 1 on x = 0 and y = 0, u = -1 on x = 1 and y = 1, its adjoint
//   0 = theta_1 u w_x + theta_2 u w_y + w_xx + w_yy + (u - h),  w = 0 on the boundary,
// and the inverse problem of recovering theta from h = u(theta*).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "adjoint_flow/errors.hpp"
#include "adjoint_flow/mesh.hpp"
#include "adjoint_flow/online.hpp"
#include "adjoint_flow/schedule.hpp"
#include "adjoint_flow/trace.hpp"

namespace adjoint_flow {

using Theta2 = std::array<double, 2>;

struct BurgersProblem {
  Grid grid;
  Theta2 theta{0.0, 0.0};

  static BurgersProblem unit_square(std::size_t n_interior, Theta2 theta) {
    return {Grid::square(n_interior, n_interior), theta};
  }
};

/// Boundary data with interior zero. The two conflicting corners, (0,1)
/// and (1,0), take the average 0.
inline Field burgers_boundary_field(const Grid& grid) {
  if (grid.dim() != 2) throw Error("Burgers problem needs a 2D grid");
  Field g(grid);
  const std::size_t nx = grid.nodes(0), ny = grid.nodes(1);
  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    const std::size_t i = grid.ix(node), j = grid.iy(node);
    if (!grid.is_boundary(node)) continue;
    double sum = 0.0;
    int count = 0;
    if (i == 0) sum += 1.0, ++count;
    if (i == nx - 1) sum -= 1.0, ++count;
    if (j == 0) sum += 1.0, ++count;
    if (j == ny - 1) sum -= 1.0, ++count;
    g[node] = sum / count;
  }
  return g;
}

inline void require_burgers_boundary(const BurgersProblem& p, const Field& u) {
  if (!(u.grid() == p.grid)) throw ConformabilityError("field is not on the Burgers grid");
  const Field g = burgers_boundary_field(p.grid);
  for (std::size_t k = 0; k < u.size(); ++k)
    if (p.grid.is_boundary(k) && u[k] != g[k]) throw Error("field does not carry the Burgers boundary data");
}

namespace detail {

struct BurgersStencil {
  std::size_t nx, ny;
  double hx, hy, ihx2, ihy2, i2hx, i2hy;
  explicit BurgersStencil(const Grid& g)
      : nx(g.nodes(0)), ny(g.nodes(1)), hx(g.spacing(0)), hy(g.spacing(1)),
        ihx2(1.0 / (hx * hx)), ihy2(1.0 / (hy * hy)), i2hx(0.5 / hx), i2hy(0.5 / hy) {}
};

/// Forward residual on interior nodes; boundary entries set to zero.
inline void forward_residual(const BurgersStencil& s, const Theta2& th, const std::vector<double>& u,
                             std::vector<double>& r) {
  r.assign(u.size(), 0.0);
  for (std::size_t j = 1; j + 1 < s.ny; ++j)
    for (std::size_t i = 1; i + 1 < s.nx; ++i) {
      const std::size_t k = i + j * s.nx;
      const double uc = u[k], ue = u[k + 1], uw = u[k - 1], un = u[k + s.nx], us = u[k - s.nx];
      const double ux = (ue - uw) * s.i2hx, uy = (un - us) * s.i2hy;
      r[k] = -th[0] * uc * ux - th[1] * uc * uy + (ue - 2.0 * uc + uw) * s.ihx2 + (un - 2.0 * uc + us) * s.ihy2;
    }
}

inline void adjoint_residual(const BurgersStencil& s, const Theta2& th, const std::vector<double>& u,
                             const std::vector<double>& w, const std::vector<double>& h, std::vector<double>& r) {
  r.assign(u.size(), 0.0);
  for (std::size_t j = 1; j + 1 < s.ny; ++j)
    for (std::size_t i = 1; i + 1 < s.nx; ++i) {
      const std::size_t k = i + j * s.nx;
      const double wc = w[k], we = w[k + 1], ww = w[k - 1], wn = w[k + s.nx], ws = w[k - s.nx];
      const double wx = (we - ww) * s.i2hx, wy = (wn - ws) * s.i2hy;
      r[k] = th[0] * u[k] * wx + th[1] * u[k] * wy + (we - 2.0 * wc + ww) * s.ihx2 + (wn - 2.0 * wc + ws) * s.ihy2 +
             (u[k] - h[k]);
    }
}

/// -int w u u_x and -int w u u_y by trapezoid quadrature (w vanishes on the boundary).
inline Theta2 gradient_integrals(const BurgersStencil& s, const std::vector<double>& u, const std::vector<double>& w) {
  double g1 = 0.0, g2 = 0.0;
  for (std::size_t j = 1; j + 1 < s.ny; ++j)
    for (std::size_t i = 1; i + 1 < s.nx; ++i) {
      const std::size_t k = i + j * s.nx;
      const double wu = w[k] * u[k];
      g1 -= wu * (u[k + 1] - u[k - 1]) * s.i2hx;
      g2 -= wu * (u[k + s.nx] - u[k - s.nx]) * s.i2hy;
    }
  const double area = s.hx * s.hy;
  return {g1 * area, g2 * area};
}

inline double weighted_norm(const Grid& g, const std::vector<double>& r) {
  double s = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) s += g.weight(k) * r[k] * r[k];
  return std::sqrt(s);
}

}  // namespace detail

inline Field burgers_residual(const BurgersProblem& p, const Field& u) {
  require_burgers_boundary(p, u);
  Field r(p.grid);
  detail::forward_residual(detail::BurgersStencil(p.grid), p.theta, u.values(), r.values());
  return r;
}

/// Residual of the adjoint equation for state u, adjoint w and target h.
inline Field burgers_adjoint_residual(const BurgersProblem& p, const Field& u, const Field& w, const Field& h) {
  u.require_conformable(w);
  u.require_conformable(h);
  Field r(p.grid);
  detail::adjoint_residual(detail::BurgersStencil(p.grid), p.theta, u.values(), w.values(), h.values(), r.values());
  return r;
}

/// Explicit pseudo-time step from the diffusion Gershgorin bound plus the
/// advective row sum (|theta_1|/hx + |theta_2|/hy) max|u|.
inline double burgers_time_step(const Grid& grid, Theta2 theta_abs_bound, double u_max, double safety = kDefaultCflSafety) {
  const double hx = grid.spacing(0), hy = grid.spacing(1);
  const double rho = 4.0 / (hx * hx) + 4.0 / (hy * hy) +
                     (std::abs(theta_abs_bound[0]) / hx + std::abs(theta_abs_bound[1]) / hy) * u_max;
  return safety * 2.0 / rho;
}

struct PseudoTimeOptions {
  double tol = 1e-10;
  std::size_t max_steps = 5'000'000;
  double safety = kDefaultCflSafety;
};

struct PseudoTimeReport {
  Field solution;
  std::size_t steps = 0;
  double residual = 0.0;
};

/// Marches u <- u + dt * R(u) until the L2 residual is at most tol.
inline PseudoTimeReport solve_burgers_steady_report(const BurgersProblem& p, const PseudoTimeOptions& opt = {},
                                                    const std::optional<Field>& initial = std::nullopt) {
  if (!(opt.tol > 0.0)) throw Error("pseudo-time tolerance must be positive");
  PseudoTimeReport rep;
  rep.solution = burgers_boundary_field(p.grid);
  if (initial) {
    require_burgers_boundary(p, *initial);
    rep.solution = *initial;
  }
  std::vector<double>& u = rep.solution.values();
  const double u_max = std::max(1.0, rep.solution.max_abs());
  const double dt = burgers_time_step(p.grid, p.theta, u_max, opt.safety);
  const detail::BurgersStencil s(p.grid);
  std::vector<double> r;
  for (rep.steps = 0;; ++rep.steps) {
    detail::forward_residual(s, p.theta, u, r);
    rep.residual = detail::weighted_norm(p.grid, r);
    if (!std::isfinite(rep.residual)) throw DivergenceError("Burgers pseudo-time solve diverged", rep.steps);
    if (rep.residual <= opt.tol) return rep;
    if (rep.steps >= opt.max_steps)
      throw NonConvergenceError("Burgers pseudo-time solve hit its step cap", rep.residual, rep.steps);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] += dt * r[k];
  }
}

inline Field solve_burgers_steady(const BurgersProblem& p, double tol) {
  PseudoTimeOptions opt;
  opt.tol = tol;
  return solve_burgers_steady_report(p, opt).solution;
}

inline PseudoTimeReport solve_burgers_adjoint_report(const BurgersProblem& p, const Field& u, const Field& h,
                                                     const PseudoTimeOptions& opt = {},
                                                     const std::optional<Field>& initial = std::nullopt) {
  if (!(opt.tol > 0.0)) throw Error("pseudo-time tolerance must be positive");
  u.require_conformable(h);
  if (!(u.grid() == p.grid)) throw ConformabilityError("field is not on the Burgers grid");
  PseudoTimeReport rep;
  rep.solution = Field(p.grid);
  if (initial) {
    rep.solution = *initial;
    rep.solution.zero_boundary();
  }
  std::vector<double>& w = rep.solution.values();
  const double dt = burgers_time_step(p.grid, p.theta, std::max(1.0, u.max_abs()), opt.safety);
  const detail::BurgersStencil s(p.grid);
  std::vector<double> r;
  for (rep.steps = 0;; ++rep.steps) {
    detail::adjoint_residual(s, p.theta, u.values(), w, h.values(), r);
    rep.residual = detail::weighted_norm(p.grid, r);
    if (!std::isfinite(rep.residual)) throw DivergenceError("Burgers adjoint solve diverged", rep.steps);
    if (rep.residual <= opt.tol) return rep;
    if (rep.steps >= opt.max_steps)
      throw NonConvergenceError("Burgers adjoint solve hit its step cap", rep.residual, rep.steps);
    for (std::size_t k = 0; k < w.size(); ++k) w[k] += dt * r[k];
  }
}

inline Field solve_burgers_adjoint(const BurgersProblem& p, const Field& u, const Field& h, double tol) {
  PseudoTimeOptions opt;
  opt.tol = tol;
  return solve_burgers_adjoint_report(p, u, h, opt).solution;
}

/// dJ/dtheta_1 = -int w u u_x, dJ/dtheta_2 = -int w u u_y.
inline Theta2 burgers_gradient(const BurgersProblem& p, const Field& u, const Field& u_hat) {
  u.require_conformable(u_hat);
  if (!(u.grid() == p.grid)) throw ConformabilityError("field is not on the Burgers grid");
  return detail::gradient_integrals(detail::BurgersStencil(p.grid), u.values(), u_hat.values());
}

/// J = 1/2 int (u - h)^2 (+ gamma/2 |theta|^2).
inline double burgers_misfit(const Field& u, const Field& h, const Theta2& theta = {0.0, 0.0}, double gamma = 0.0) {
  const Field d = u - h;
  return 0.5 * inner_product(d, d) + 0.5 * gamma * (theta[0] * theta[0] + theta[1] * theta[1]);
}

inline double burgers_objective(const BurgersProblem& p, const Field& h, double tol) {
  return burgers_misfit(solve_burgers_steady(p, tol), h);
}

struct BurgersState {
  double t = 0.0;
  Field u;
  Field u_hat;
  Theta2 theta{0.0, 0.0};
  std::size_t step_count = 0;
};

/// Explicit Euler for the coupled pseudo-time forward, adjoint and
/// parameter equations. All three updates read the state at time t.
class BurgersIntegrator {
 public:
  BurgersIntegrator(const Grid& grid, Field target, Schedule schedule, double dt, double gamma, double theta_bound)
      : grid_(grid), s_(grid), h_(std::move(target)), sched_(std::move(schedule)), dt_(dt), gamma_(gamma),
        bound_(theta_bound) {
    sched_.validate();
    if (!(dt_ > 0.0)) throw Error("time step must be positive");
  }

  double dt() const noexcept { return dt_; }
  const Schedule& schedule() const noexcept { return sched_; }
  const Field& target() const noexcept { return h_; }

  BurgersState initial(Theta2 theta0) const {
    return {0.0, burgers_boundary_field(grid_), Field(grid_), theta0, 0};
  }

  void step(BurgersState& st) {
    const double alpha = sched_(st.t);
    std::vector<double>& u = st.u.values();
    std::vector<double>& w = st.u_hat.values();
    detail::forward_residual(s_, st.theta, u, r_);
    detail::adjoint_residual(s_, st.theta, u, w, h_.values(), ra_);
    const Theta2 g = detail::gradient_integrals(s_, u, w);
    double check = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      u[k] += dt_ * r_[k];
      w[k] += dt_ * ra_[k];
      check += r_[k] + ra_[k];
    }
    for (int i = 0; i < 2; ++i) st.theta[i] -= alpha * (g[i] + gamma_ * st.theta[i]) * dt_;
    ++st.step_count;
    st.t = static_cast<double>(st.step_count) * dt_;
    if (!std::isfinite(check) || !std::isfinite(st.theta[0]) || !std::isfinite(st.theta[1]))
      throw DivergenceError("non-finite value in Burgers online state", st.step_count);
    if (std::abs(st.theta[0]) > bound_ || std::abs(st.theta[1]) > bound_)
      throw DivergenceError("parameters left the stability bound " + format_number(bound_), st.step_count);
  }

 private:
  Grid grid_;
  detail::BurgersStencil s_;
  Field h_;
  Schedule sched_;
  double dt_, gamma_, bound_;
  std::vector<double> r_, ra_;
};

struct BurgersOnlineConfig {
  std::size_t n_interior = 64;
  Theta2 theta_star{10.0, 10.0};
  Theta2 theta0{0.0, 0.0};
  double gamma = 0.0;
  double horizon = 20.0;
  /// <= 0 selects C_alpha by bracketing.
  double c_alpha = 0.0;
  /// |theta_i| assumed when sizing the step; leaving it counts as divergence.
  double theta_bound = 20.0;
  double safety = kDefaultCflSafety;
  double target_tol = 1e-11;
  double oracle_tol = 1e-9;
  bool oracles = true;
  std::size_t log_stride = 1000;
  std::size_t log_per_decade = 20;
  double probe_horizon = 1.0;
  double probe_backoff = 4.0;
  std::size_t max_probe_exponent = 40;
};

struct LearningRateBracket {
  double largest_stable = 0.0;
  double chosen = 0.0;
  std::size_t probes = 0;
};

/// Doubles C_alpha from 1 until a short probe run of alpha = C/(1+t)
/// diverges; returns the largest stable power of two and that value
/// divided by the backoff factor.
inline LearningRateBracket bracket_learning_rate(const Grid& grid, const Field& target, const BurgersOnlineConfig& cfg,
                                                 double dt) {
  LearningRateBracket out;
  for (std::size_t e = 0; e <= cfg.max_probe_exponent; ++e) {
    const double c = std::ldexp(1.0, static_cast<int>(e));
    BurgersIntegrator integ(grid, target, Schedule::inverse_linear(c), dt, cfg.gamma, cfg.theta_bound);
    BurgersState st = integ.initial(cfg.theta0);
    ++out.probes;
    bool stable = true;
    try {
      while (st.t < cfg.probe_horizon) integ.step(st);
    } catch (const DivergenceError&) {
      stable = false;
    }
    if (!stable) break;
    out.largest_stable = c;
  }
  if (out.largest_stable == 0.0) throw Error("learning-rate bracket: even C_alpha = 1 diverges");
  out.chosen = out.largest_stable / cfg.probe_backoff;
  return out;
}

struct BurgersRun {
  TraceRecord trace;
  BurgersState final_state;
  double c_alpha = 0.0;
  double dt = 0.0;
  LearningRateBracket bracket;
};

/// Target h: steady solution at theta*.
inline Field burgers_target(const BurgersOnlineConfig& cfg) {
  PseudoTimeOptions opt;
  opt.tol = cfg.target_tol;
  return solve_burgers_steady_report(BurgersProblem::unit_square(cfg.n_interior, cfg.theta_star), opt).solution;
}

inline TraceRow burgers_trace_row(const BurgersOnlineConfig& cfg, const BurgersState& st, const Field& h,
                                  const Schedule& sched) {
  TraceRow r;
  r.t = st.t;
  r.theta = {st.theta[0], st.theta[1]};
  r.theta_err = std::hypot(st.theta[0] - cfg.theta_star[0], st.theta[1] - cfg.theta_star[1]);
  r.alpha = sched(st.t);
  r.sup_norm = norm_l2(st.u) + norm_l2(st.u_hat) + std::hypot(st.theta[0], st.theta[1]);
  const BurgersProblem p{st.u.grid(), st.theta};
  if (cfg.oracles) {
    PseudoTimeOptions opt;
    opt.tol = cfg.oracle_tol;
    const Field us = solve_burgers_steady_report(p, opt, st.u).solution;
    const Field ws = solve_burgers_adjoint_report(p, us, h, opt, st.u_hat).solution;
    const Theta2 g = burgers_gradient(p, us, ws);
    r.J = burgers_misfit(us, h, st.theta, cfg.gamma);
    r.grad_norm = std::hypot(g[0] + cfg.gamma * st.theta[0], g[1] + cfg.gamma * st.theta[1]);
    r.phi_norm = norm_l2(st.u - us);
    r.psi_norm = norm_l2(st.u_hat - ws);
  } else {
    // Instantaneous quantities from the online state.
    const Theta2 g = burgers_gradient(p, st.u, st.u_hat);
    r.J = burgers_misfit(st.u, h, st.theta, cfg.gamma);
    r.grad_norm = std::hypot(g[0] + cfg.gamma * st.theta[0], g[1] + cfg.gamma * st.theta[1]);
    r.phi_norm = norm_l2(burgers_residual(p, st.u));
    r.psi_norm = norm_l2(burgers_adjoint_residual(p, st.u, st.u_hat, h));
  }
  return r;
}

/// Online recovery of theta* from h = u(theta*). Pass `target` to reuse a
/// cached h. Throws DivergedRun with the partial trace on divergence.
inline BurgersRun run_burgers_online(const BurgersOnlineConfig& cfg, std::optional<Field> target = std::nullopt) {
  if (!(cfg.horizon > 0.0)) throw Error("horizon must be positive");
  const Grid grid = Grid::square(cfg.n_interior, cfg.n_interior);
  const Field h = target ? std::move(*target) : burgers_target(cfg);
  if (!(h.grid() == grid)) throw ConformabilityError("Burgers target is on a different grid");

  BurgersRun run;
  run.dt = burgers_time_step(grid, {cfg.theta_bound, cfg.theta_bound}, 1.0, cfg.safety);
  if (cfg.c_alpha > 0.0) {
    run.c_alpha = cfg.c_alpha;
  } else {
    run.bracket = bracket_learning_rate(grid, h, cfg, run.dt);
    run.c_alpha = run.bracket.chosen;
  }

  BurgersIntegrator integ(grid, h, Schedule::inverse_linear(run.c_alpha), run.dt, cfg.gamma, cfg.theta_bound);
  BurgersState st = integ.initial(cfg.theta0);
  const auto total = static_cast<std::size_t>(std::llround(std::ceil(cfg.horizon / run.dt - 1e-9)));
  const std::vector<std::size_t> logs = log_schedule(total, cfg.log_stride, cfg.log_per_decade);
  run.trace.theta_dim = 2;
  std::size_t next = 0;
  try {
    while (true) {
      if (next < logs.size() && st.step_count == logs[next]) {
        run.trace.rows.push_back(burgers_trace_row(cfg, st, h, integ.schedule()));
        ++next;
      }
      if (st.step_count >= total) break;
      integ.step(st);
    }
  } catch (const DivergenceError& e) {
    throw DivergedRun(e, std::move(run.trace));
  }
  run.final_state = std::move(st);
  return run;
}

}  // namespace adjoint_flow
