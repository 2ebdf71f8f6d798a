#pragma once

// Config-driven experiments behind the command-line tool. Each run writes
// into <out>/<subcommand>-<hash of the effective config>/.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "adjoint_flow/baseline.hpp"
#include "adjoint_flow/burgers.hpp"
#include "adjoint_flow/config.hpp"
#include "adjoint_flow/diagnostics.hpp"
#include "adjoint_flow/elliptic.hpp"
#include "adjoint_flow/errors.hpp"
#include "adjoint_flow/io.hpp"
#include "adjoint_flow/linsolve.hpp"
#include "adjoint_flow/mesh.hpp"
#include "adjoint_flow/objective.hpp"
#include "adjoint_flow/online.hpp"
#include "adjoint_flow/schedule.hpp"
#include "adjoint_flow/source.hpp"
#include "adjoint_flow/svg.hpp"
#include "adjoint_flow/trace.hpp"

namespace adjoint_flow {

enum ExitCode : int { exit_ok = 0, exit_error = 1, exit_threshold = 2 };

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"run", "baseline", "burgers", "gradcheck", "rates", "schedule"};
  return names;
}

inline std::vector<KeySpec> config_schema() {
  return {
      {"grid.dim", "1", "spatial dimension, 1 or 2"},
      {"grid.n_interior", std::nullopt, "interior nodes per axis"},
      {"grid.lo", "0", "domain lower corner"},
      {"grid.hi", "1", "domain upper corner"},

      {"operator.diffusion", "1", "constant diffusion coefficient"},
      {"operator.advection", "0", "advection vector b, comma separated per axis"},
      {"operator.reaction", "0", "reaction coefficient c"},

      {"source.kind", "linear-sine", "linear-sine or tanh-sine"},
      {"source.d", "3", "number of parameters"},
      {"source.theta_true", "1", "parameters generating the target h = u*(theta_true); padded with zeros"},
      {"source.theta0", "", "initial parameters; empty means zeros"},
      {"source.gamma", "0.01", "Tikhonov weight"},

      {"solver.method", "auto", "auto, cg or bicgstab"},
      {"solver.tol", "1e-10", "relative residual tolerance"},
      {"solver.max_iter", "0", "0 means 10 x unknowns"},
      {"solver.jacobi", "false", "Jacobi preconditioning"},

      {"schedule.kind", "inverse-linear", "inverse-linear, constant or custom-power"},
      {"schedule.c_alpha", "0", "learning-rate magnitude; <= 0 means 2 / q"},
      {"schedule.exponent", "1", "p for custom-power"},

      {"run.horizon", "1000", "final time T"},
      {"run.dt", "0", "time step; <= 0 means cfl_safety x CFL bound"},
      {"run.cfl_safety", "0.9", "fraction of the CFL bound"},
      {"run.allow_unstable", "false", "accept dt above the safety bound with a warning"},
      {"run.order", "simultaneous", "simultaneous or sequential"},
      {"run.log_stride", "100", "steps between logged rows"},
      {"run.log_per_decade", "0", "if > 0, log this many rows per decade of steps instead"},
      {"run.seed", "1", "seed for randomized utilities"},
      {"run.fit_lo", "100", "rate-fit window start"},
      {"run.fit_hi", "10000", "rate-fit window end (clipped to the horizon)"},
      {"run.max_slope", "-0.45", "largest accepted log-log slope of theta_err"},
      {"run.min_r2", "0.95", "smallest accepted r^2 of the rate fit"},
      {"run.max_grad", "1e-3", "largest accepted grad_norm over the final decade"},
      {"run.theta_tol", "1e-3", "per-coordinate tolerance against the closed-form minimizer"},
      {"run.ratio_start", "100", "start of the envelope-ratio window"},

      {"baseline.iterations", "200", "offline gradient steps"},
      {"baseline.step", "0", "constant step; <= 0 means 1 / L"},
      {"baseline.cost_tol", "1e-3", "theta_err level used for the cost comparison"},
      {"baseline.compare_online", "true", "also run the online algorithm for the cost comparison"},

      {"gradcheck.points", "10", "random parameter vectors"},
      {"gradcheck.range", "2", "parameters drawn uniformly from [-range, range]"},
      {"gradcheck.fd_step", "1e-5", "central-difference step"},
      {"gradcheck.threshold", "1e-6", "largest accepted relative l2 error"},

      {"burgers.n_interior", "64", "interior nodes per axis"},
      {"burgers.theta_star", "10,10", "parameters generating the target"},
      {"burgers.theta0", "0,0", "initial parameters"},
      {"burgers.gamma", "0", "Tikhonov weight"},
      {"burgers.horizon", "10", "final pseudo-time"},
      {"burgers.c_alpha", "0", "learning-rate magnitude; <= 0 means bracketing"},
      {"burgers.theta_bound", "20", "parameter bound used for the step size and divergence detection"},
      {"burgers.cfl_safety", "0.9", "fraction of the explicit step bound"},
      {"burgers.target_tol", "1e-11", "residual tolerance of the target solve"},
      {"burgers.oracle_tol", "1e-9", "residual tolerance of logged steady solves"},
      {"burgers.oracles", "true", "log steady-solve oracles at each row"},
      {"burgers.log_stride", "1000", "steps between rows when log_per_decade is 0"},
      {"burgers.log_per_decade", "20", "rows per decade of steps"},
      {"burgers.probe_horizon", "1", "horizon of each bracketing probe"},
      {"burgers.probe_backoff", "4", "divisor applied to the largest stable probe value"},
      {"burgers.noise_floor", "1e-9", "theta_err below this is treated as converged for the rate fit"},
      {"burgers.max_error", "0.1", "largest accepted final theta_err"},
      {"burgers.max_slope", "-0.45", "largest accepted log-log slope of theta_err"},
      {"burgers.cache_target", "true", "reuse the target field from <out>/cache"},

      {"rates.trace", "", "trace CSV to analyse"},
      {"rates.column", "theta_err", "column to fit"},
      {"rates.t_lo", "0", "fit window start; 0 with t_hi 0 means the last two decades"},
      {"rates.t_hi", "0", "fit window end"},
      {"rates.floor", "0", "if > 0, fit the two decades ending where the column leaves this floor"},
      {"rates.max_slope", "-0.45", "largest accepted slope"},
      {"rates.min_r2", "0", "smallest accepted r^2"},

      {"output.svg", "true", "write SVG plots"},
      {"output.fields", "true", "write final fields as CSV"},
      {"output.matrix_market", "false", "write the operator in MatrixMarket format"},
  };
}

inline std::vector<std::string> required_keys(const std::string& subcommand) {
  if (subcommand == "rates") return {"rates.trace"};
  return {};
}

/// grid.n_interior has no default, but Burgers and schedule checks do not use it.
inline std::vector<KeySpec> schema_for(const std::string& subcommand) {
  std::vector<KeySpec> s = config_schema();
  if (subcommand == "burgers" || subcommand == "schedule" || subcommand == "rates")
    for (KeySpec& k : s)
      if (k.key == "grid.n_interior") k.default_value = "31";
  if (subcommand == "rates")
    for (KeySpec& k : s)
      if (k.key == "rates.trace") k.default_value.reset();
  return s;
}

inline Config load_config(const std::string& subcommand, const std::string& text,
                          const std::vector<std::string>& overrides = {}) {
  if (std::find(subcommands().begin(), subcommands().end(), subcommand) == subcommands().end())
    throw ConfigError("unknown subcommand '" + subcommand + "'");
  return Config::from_text(schema_for(subcommand), text, overrides, required_keys(subcommand));
}

// ---------------------------------------------------------------------------
// Problem construction

struct StockProblem {
  std::shared_ptr<LinearProblem> problem;
  std::vector<double> theta_true;
  ThetaVector theta0;
  double gamma = 0.0;
  std::optional<QuadraticReference> reference;
  /// Minimizer of the continuum objective, when it has a closed form.
  std::optional<std::vector<double>> continuum_theta_star;
};

inline Grid grid_from(const Config& c) {
  const std::size_t n = c.count("grid.n_interior");
  const double lo = c.number("grid.lo"), hi = c.number("grid.hi");
  const auto dim = c.count("grid.dim");
  if (dim == 1) return Grid::line(n, lo, hi);
  if (dim == 2) return Grid::square(n, n, {lo, lo}, {hi, hi});
  throw ConfigError("grid.dim must be 1 or 2");
}

inline std::vector<double> padded(std::vector<double> v, std::size_t d, const std::string& key) {
  if (v.size() > d) throw ConfigError(key + " has more entries than source.d");
  v.resize(d, 0.0);
  return v;
}

inline SolverConfig solver_from(const Config& c) {
  SolverConfig s;
  s.method = parse_solver_method(c.str("solver.method"));
  s.tol = c.number("solver.tol");
  s.max_iter = c.count("solver.max_iter");
  s.jacobi = c.flag("solver.jacobi");
  s.validate();
  return s;
}

inline StockProblem build_stock_problem(const Config& c) {
  const Grid grid = grid_from(c);
  std::vector<double> adv = c.numbers("operator.advection");
  adv.resize(2, adv.size() == 1 ? adv[0] : 0.0);
  const double diffusion = c.number("operator.diffusion"), reaction = c.number("operator.reaction");
  const DiscreteOperator op = assemble(grid, EllipticCoefficients::constant(diffusion, {adv[0], adv[1]}, reaction));

  const std::size_t d = c.count("source.d");
  const std::string kind = c.str("source.kind");
  std::shared_ptr<const SourceModel> model;
  if (kind == "linear-sine")
    model = std::make_shared<LinearBasisSource>(sine_basis(grid.dim(), d));
  else if (kind == "tanh-sine")
    model = std::make_shared<TanhBasisSource>(sine_basis(grid.dim(), d));
  else
    throw ConfigError("unknown source.kind '" + kind + "'");

  StockProblem s;
  s.gamma = c.number("source.gamma");
  s.theta_true = padded(c.numbers("source.theta_true"), d, "source.theta_true");
  s.theta0 = ThetaVector(padded(c.numbers("source.theta0"), d, "source.theta0"), s.gamma);
  const SolverConfig solver = solver_from(c);
  const Field h = solve_steady(op, eval_field(*model, grid, s.theta_true), solver);
  s.problem = std::make_shared<LinearProblem>(op, model, TargetProfile{h}, solver);

  if (model->linear_in_theta() && model->gradient_is_constant()) s.reference = quadratic_reference(*s.problem, s.gamma);
  const bool pure = grid.dim() == 1 && grid.lo(0) == 0.0 && grid.hi(0) == 1.0 && adv[0] == 0.0 && kind == "linear-sine";
  if (pure) {
    // Sine modes diagonalize -D u'' + c u; each has squared L2 norm 1/2.
    const double pi = std::acos(-1.0);
    std::vector<double> ts(d);
    for (std::size_t k = 0; k < d; ++k) {
      const double lam = diffusion * std::pow(static_cast<double>(k + 1) * pi, 2) + reaction;
      ts[k] = s.theta_true[k] / (1.0 + 2.0 * s.gamma * lam * lam);
    }
    s.continuum_theta_star = ts;
  }
  return s;
}

/// Minimizer and Hessian bounds: exact for linear sources, otherwise from a
/// long offline descent and a finite-difference Hessian at its end point.
inline QuadraticReference reference_for(const StockProblem& s) {
  if (s.reference) return *s.reference;
  ThetaVector theta(s.theta_true, s.gamma);
  Eigen::MatrixXd hess = fd_hessian(*s.problem, theta);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
  const double L = es.eigenvalues().maxCoeff();
  if (!(L > 0.0)) throw Error("cannot bound the Hessian for the offline reference");
  OfflineRunConfig oc;
  oc.theta0 = theta;
  oc.iterations = 5000;
  oc.step = 1.0 / L;
  const TraceRecord tr = run_offline(*s.problem, oc);
  QuadraticReference ref;
  ref.theta_star = tr.rows.back().theta;
  ref.hessian = fd_hessian(*s.problem, ThetaVector(ref.theta_star, s.gamma));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(ref.hessian);
  ref.q = es2.eigenvalues().minCoeff();
  ref.L = es2.eigenvalues().maxCoeff();
  return ref;
}

inline Schedule schedule_from(const Config& c, double default_c) {
  const ScheduleKind kind = parse_schedule_kind(c.str("schedule.kind"));
  double ca = c.number("schedule.c_alpha");
  if (ca <= 0.0) ca = default_c;
  switch (kind) {
    case ScheduleKind::constant: return Schedule::constant(ca);
    case ScheduleKind::custom_power: return Schedule::power(ca, c.number("schedule.exponent"));
    default: return Schedule::inverse_linear(ca);
  }
}

inline UpdateOrder order_from(const Config& c) {
  const std::string& o = c.str("run.order");
  if (o == "simultaneous") return UpdateOrder::simultaneous;
  if (o == "sequential") return UpdateOrder::sequential;
  throw ConfigError("run.order must be simultaneous or sequential");
}

// ---------------------------------------------------------------------------
// Runs

struct ExperimentResult {
  int exit_code = exit_ok;
  std::string run_dir;
  KeyValueReport report;
};

struct RunContext {
  std::string subcommand;
  std::string out_root;
  std::string dir;
  const Config& config;

  std::string path(const std::string& name) const { return (std::filesystem::path(dir) / name).string(); }
};

namespace detail {

inline void set_vector(KeyValueReport& r, const std::string& prefix, const std::vector<double>& v) {
  for (std::size_t k = 0; k < v.size(); ++k) r.set(prefix + std::to_string(k), v[k]);
}

inline void write_trace_plots(const RunContext& ctx, const TraceRecord& trace, const std::string& title) {
  if (!ctx.config.flag("output.svg") || trace.empty()) return;
  std::vector<std::string> theta_cols;
  for (std::size_t k = 0; k < trace.theta_dim; ++k) theta_cols.push_back("theta_" + std::to_string(k));
  write_svg(ctx.path("theta.svg"), trace, theta_cols, Axes::linear, {}, title + ": parameters");
  const auto err = trace.column("theta_err");
  if (std::any_of(err.begin(), err.end(), [](double e) { return e > 0.0; }))
    write_svg(ctx.path("theta_err.svg"), trace, {"theta_err"}, Axes::log_log, {{-0.5, "theta_err", "t^-1/2"}},
              title + ": parameter error");
}

inline void check(KeyValueReport& r, int& code, const std::string& name, bool ok) {
  r.set("check." + name, ok ? "PASS" : "FAIL");
  if (!ok) code = exit_threshold;
}

inline int diverged(const RunContext& ctx, ExperimentResult& res, const DivergedRun& e) {
  write_trace_csv(e.partial(), ctx.path("trace.csv"));
  res.report.set("status", "diverged");
  res.report.set("diverged_at_step", e.step());
  res.report.set("message", e.what());
  return exit_error;
}

}  // namespace detail

inline int run_online_experiment(const RunContext& ctx, ExperimentResult& res) {
  const Config& c = ctx.config;
  KeyValueReport& r = res.report;
  const StockProblem s = build_stock_problem(c);
  const LinearProblem& p = *s.problem;
  const QuadraticReference ref = reference_for(s);
  const Schedule sched = schedule_from(c, 2.0 / ref.q);
  const StepSize dt = make_step_size(p.op, c.number("run.dt"), c.number("run.cfl_safety"), c.flag("run.allow_unstable"));
  const double T = c.number("run.horizon");

  OnlineRunConfig oc;
  oc.schedule = sched;
  oc.dt = dt;
  oc.horizon = T;
  oc.theta0 = s.theta0;
  oc.log_stride = c.count("run.log_stride");
  oc.log_per_decade = c.count("run.log_per_decade");
  oc.theta_star = ref.theta_star;
  oc.order = order_from(c);

  r.set("dt", dt.delta);
  r.set("cfl_bound", dt.cfl_bound);
  if (!dt.warning.empty()) r.set("warning", dt.warning);
  r.set("schedule", to_string(sched.kind));
  r.set("c_alpha", sched.c_alpha);
  r.set("hessian_q", ref.q);
  r.set("hessian_L", ref.L);
  r.set("c_alpha_q", sched.c_alpha * ref.q);
  detail::set_vector(r, "theta_star_", ref.theta_star);
  if (s.continuum_theta_star) detail::set_vector(r, "theta_star_continuum_", *s.continuum_theta_star);
  add_schedule_report(r, check_schedule(sched, s.gamma));

  OnlineRun run;
  try {
    run = run_online(p, oc);
  } catch (const DivergedRun& e) {
    return detail::diverged(ctx, res, e);
  }
  const TraceRecord& tr = run.trace;
  write_trace_csv(tr, ctx.path("trace.csv"));
  detail::write_trace_plots(ctx, tr, "online");
  if (c.flag("output.fields")) {
    write_field_csv(run.final_state.u, ctx.path("u_final.csv"));
    write_field_csv(run.final_state.u_hat, ctx.path("u_hat_final.csv"));
  }
  if (c.flag("output.matrix_market")) write_matrix_market(p.op, ctx.path("operator.mtx"));

  const TraceRow& last = tr.rows.back();
  r.set("steps", run.final_state.step_count);
  r.set("operator_applications", 2 * run.final_state.step_count);
  r.set("final_t", last.t);
  detail::set_vector(r, "final_theta_", last.theta);
  r.set("final_theta_err", last.theta_err);
  r.set("final_grad_norm", last.grad_norm);

  int code = exit_ok;
  const std::vector<double> t = tr.column("t");
  if (s.continuum_theta_star) {
    double worst = 0.0;
    for (std::size_t k = 0; k < last.theta.size(); ++k)
      worst = std::max(worst, std::abs(last.theta[k] - (*s.continuum_theta_star)[k]));
    r.set("max_coordinate_error_continuum", worst);
    detail::check(r, code, "theta_continuum", worst <= c.number("run.theta_tol"));
  }

  const Window fit_window{c.number("run.fit_lo"), std::min(c.number("run.fit_hi"), T)};
  try {
    const RateFit fit = fit_rate(tr, "theta_err", fit_window);
    r.set("rate.exponent", fit.exponent);
    r.set("rate.r_squared", fit.r_squared);
    r.set("rate.t_lo", fit.window.lo);
    r.set("rate.t_hi", fit.window.hi);
    detail::check(r, code, "rate", fit.exponent <= c.number("run.max_slope") && fit.r_squared >= c.number("run.min_r2"));
  } catch (const FitError& e) {
    r.set("rate.status", std::string("unavailable: ") + e.what());
  }

  const std::vector<double> grad = tr.column("grad_norm");
  double final_decade_max = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] >= T / 10.0) final_decade_max = std::max(final_decade_max, grad[i]);
  r.set("grad_norm_final_decade_max", final_decade_max);
  detail::check(r, code, "stationarity", final_decade_max <= c.number("run.max_grad"));

  const std::vector<double> sup = tr.column("sup_norm");
  const auto arg = static_cast<std::size_t>(std::max_element(sup.begin(), sup.end()) - sup.begin());
  r.set("sup_norm_max", sup[arg]);
  r.set("sup_norm_argmax_t", t[arg]);
  detail::check(r, code, "bounded", std::isfinite(sup[arg]) && t[arg] < T / 2.0);

  const double lambda = estimate_coercivity(p.op).lambda_min;
  r.set("coercivity_lambda", lambda);
  const double t0 = c.number("run.ratio_start");
  if (t0 < T && lambda > 0.0) {
    const Window w{t0, T};
    auto env_phi = [&](double tt) { return std::exp(-lambda * tt) + sched(tt); };
    auto env_psi = [&](double tt) { return tt * std::exp(-lambda * tt) + sched(tt); };
    r.set("ratio.phi", ratio_bound(t, tr.column("phi_norm"), env_phi, w));
    r.set("ratio.psi", ratio_bound(t, tr.column("psi_norm"), env_psi, w));
  }
  r.set("status", "ok");
  return code;
}

inline int run_baseline_experiment(const RunContext& ctx, ExperimentResult& res) {
  const Config& c = ctx.config;
  KeyValueReport& r = res.report;
  const StockProblem s = build_stock_problem(c);
  const LinearProblem& p = *s.problem;
  const QuadraticReference ref = reference_for(s);
  OfflineRunConfig oc;
  oc.theta0 = s.theta0;
  oc.iterations = c.count("baseline.iterations");
  oc.step = c.number("baseline.step") > 0.0 ? c.number("baseline.step") : 1.0 / ref.L;
  oc.theta_star = ref.theta_star;
  r.set("step", oc.step);
  r.set("hessian_q", ref.q);
  r.set("hessian_L", ref.L);

  TraceRecord tr;
  try {
    tr = run_offline(p, oc);
  } catch (const DivergedRun& e) {
    return detail::diverged(ctx, res, e);
  }
  write_trace_csv(tr, ctx.path("trace.csv"));
  detail::write_trace_plots(ctx, tr, "offline");
  detail::set_vector(r, "final_theta_", tr.rows.back().theta);
  r.set("final_theta_err", tr.rows.back().theta_err);

  const double tol = c.number("baseline.cost_tol");
  r.set("cost_tol", tol);
  if (auto k = first_row_below(tr, "theta_err", tol)) {
    r.set("offline.iterations_to_tol", *k);
    r.set("offline.inner_iterations_to_tol", tr.rows[*k].cum_inner_iters);
  } else {
    r.set("offline.iterations_to_tol", "not reached");
  }

  if (c.flag("baseline.compare_online")) {
    OnlineRunConfig on;
    on.schedule = schedule_from(c, 2.0 / ref.q);
    on.dt = make_step_size(p.op, c.number("run.dt"), c.number("run.cfl_safety"), c.flag("run.allow_unstable"));
    on.horizon = c.number("run.horizon");
    on.theta0 = s.theta0;
    on.log_stride = c.count("run.log_stride");
    on.log_per_decade = c.count("run.log_per_decade");
    on.theta_star = ref.theta_star;
    on.order = order_from(c);
    try {
      const OnlineRun run = run_online(p, on);
      write_trace_csv(run.trace, ctx.path("online_trace.csv"));
      if (auto k = first_row_below(run.trace, "theta_err", tol)) {
        const double steps = std::round(run.trace.rows[*k].t / on.dt.delta);
        r.set("online.t_to_tol", run.trace.rows[*k].t);
        r.set("online.operator_applications_to_tol", 2.0 * steps);
      } else {
        r.set("online.t_to_tol", "not reached");
      }
    } catch (const DivergedRun& e) {
      r.set("online.status", std::string("diverged: ") + e.what());
    }
  }
  r.set("status", "ok");
  return exit_ok;
}

inline std::string burgers_cache_path(const std::string& out_root, const BurgersOnlineConfig& bc) {
  const std::string key = "n" + std::to_string(bc.n_interior) + "_" + format_number(bc.theta_star[0]) + "_" +
                          format_number(bc.theta_star[1]) + "_tol" + format_number(bc.target_tol);
  return (std::filesystem::path(out_root) / "cache" / ("burgers_target_" + key + ".csv")).string();
}

inline int run_burgers_experiment(const RunContext& ctx, ExperimentResult& res) {
  const Config& c = ctx.config;
  KeyValueReport& r = res.report;
  BurgersOnlineConfig bc;
  bc.n_interior = c.count("burgers.n_interior");
  const auto ts = c.numbers("burgers.theta_star"), t0 = c.numbers("burgers.theta0");
  if (ts.size() != 2 || t0.size() != 2) throw ConfigError("burgers.theta_star and burgers.theta0 need two entries");
  bc.theta_star = {ts[0], ts[1]};
  bc.theta0 = {t0[0], t0[1]};
  bc.gamma = c.number("burgers.gamma");
  bc.horizon = c.number("burgers.horizon");
  bc.c_alpha = c.number("burgers.c_alpha");
  bc.theta_bound = c.number("burgers.theta_bound");
  bc.safety = c.number("burgers.cfl_safety");
  bc.target_tol = c.number("burgers.target_tol");
  bc.oracle_tol = c.number("burgers.oracle_tol");
  bc.oracles = c.flag("burgers.oracles");
  bc.log_stride = c.count("burgers.log_stride");
  bc.log_per_decade = c.count("burgers.log_per_decade");
  bc.probe_horizon = c.number("burgers.probe_horizon");
  bc.probe_backoff = c.number("burgers.probe_backoff");

  const Grid grid = Grid::square(bc.n_interior, bc.n_interior);
  std::optional<Field> h;
  const std::string cache = burgers_cache_path(ctx.out_root, bc);
  if (c.flag("burgers.cache_target") && std::filesystem::exists(cache)) {
    h = read_field_csv(cache, grid);
    r.set("target", "cached");
  } else {
    h = burgers_target(bc);
    if (c.flag("burgers.cache_target")) write_field_csv(*h, cache);
    r.set("target", "solved");
  }

  BurgersRun run;
  try {
    run = run_burgers_online(bc, h);
  } catch (const DivergedRun& e) {
    return detail::diverged(ctx, res, e);
  }
  const TraceRecord& tr = run.trace;
  write_trace_csv(tr, ctx.path("trace.csv"));
  detail::write_trace_plots(ctx, tr, "Burgers");
  if (c.flag("output.fields")) {
    write_field_csv(*h, ctx.path("target.csv"));
    write_field_csv(run.final_state.u, ctx.path("u_final.csv"));
  }
  r.set("dt", run.dt);
  r.set("c_alpha", run.c_alpha);
  if (run.bracket.probes > 0) {
    r.set("bracket.largest_stable", run.bracket.largest_stable);
    r.set("bracket.probes", run.bracket.probes);
  }
  r.set("steps", run.final_state.step_count);
  r.set("final_theta_0", run.final_state.theta[0]);
  r.set("final_theta_1", run.final_state.theta[1]);
  const double err = tr.rows.back().theta_err;
  r.set("final_theta_err", err);

  int code = exit_ok;
  detail::check(r, code, "recovery", err <= c.number("burgers.max_error"));
  try {
    const std::vector<double> t = tr.column("t"), e = tr.column("theta_err");
    const Window w = window_above_floor(t, e, c.number("burgers.noise_floor"));
    const RateFit fit = fit_rate(t, e, w);
    r.set("rate.exponent", fit.exponent);
    r.set("rate.r_squared", fit.r_squared);
    r.set("rate.t_lo", fit.window.lo);
    r.set("rate.t_hi", fit.window.hi);
    detail::check(r, code, "rate", fit.exponent <= c.number("burgers.max_slope"));
  } catch (const FitError& ex) {
    r.set("rate.status", std::string("unavailable: ") + ex.what());
    detail::check(r, code, "rate", false);
  }
  r.set("status", "ok");
  return code;
}

inline int run_gradcheck_experiment(const RunContext& ctx, ExperimentResult& res) {
  const Config& c = ctx.config;
  KeyValueReport& r = res.report;
  const StockProblem s = build_stock_problem(c);
  const LinearProblem& p = *s.problem;
  const std::size_t points = c.count("gradcheck.points");
  const double range = c.number("gradcheck.range"), step = c.number("gradcheck.fd_step");
  std::mt19937_64 rng(c.count("run.seed"));
  std::uniform_real_distribution<double> dist(-range, range);

  std::string csv = "point,relative_error\n";
  double worst = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    std::vector<double> th(p.model->dim());
    for (double& v : th) v = dist(rng);
    const ThetaVector theta(th, s.gamma);
    const double e = relative_l2_error(adjoint_gradient(p, theta), fd_gradient(p, theta, step));
    worst = std::max(worst, e);
    csv += std::to_string(i) + "," + format_number(e) + "\n";
  }
  write_file_atomic(ctx.path("gradcheck.csv"), csv);
  const GradientSelfTest st = self_test(*p.model, p.grid(), 20, c.count("run.seed"));
  r.set("points", points);
  r.set("max_relative_error", worst);
  r.set("source_self_test_max_relative_error", st.max_relative_error);
  int code = exit_ok;
  detail::check(r, code, "gradient", worst <= c.number("gradcheck.threshold"));
  r.set("status", "ok");
  return code;
}

inline int run_rates_experiment(const RunContext& ctx, ExperimentResult& res) {
  const Config& c = ctx.config;
  KeyValueReport& r = res.report;
  const CsvTable table = parse_csv_table(read_file(c.str("rates.trace")));
  const std::string col = c.str("rates.column");
  const std::vector<double>& t = table.column("t");
  const std::vector<double>& v = table.column(col);
  std::optional<Window> w;
  if (c.number("rates.floor") > 0.0)
    w = window_above_floor(t, v, c.number("rates.floor"));
  else if (c.number("rates.t_hi") > 0.0)
    w = Window{c.number("rates.t_lo"), c.number("rates.t_hi")};
  const RateFit fit = fit_rate(t, v, w);
  r.set("column", col);
  r.set("rate.exponent", fit.exponent);
  r.set("rate.intercept", fit.intercept);
  r.set("rate.r_squared", fit.r_squared);
  r.set("rate.t_lo", fit.window.lo);
  r.set("rate.t_hi", fit.window.hi);
  r.set("rate.samples", fit.samples);
  int code = exit_ok;
  detail::check(r, code, "rate", fit.exponent <= c.number("rates.max_slope") && fit.r_squared >= c.number("rates.min_r2"));
  r.set("status", "ok");
  return code;
}

inline int run_schedule_experiment(const RunContext& ctx, ExperimentResult& res) {
  const Config& c = ctx.config;
  KeyValueReport& r = res.report;
  const Schedule sched = schedule_from(c, 1.0);
  const double gamma = c.number("source.gamma");
  const ScheduleReport sr = check_schedule(sched, gamma);
  r.set("schedule", to_string(sched.kind));
  r.set("c_alpha", sched.c_alpha);
  if (sched.kind == ScheduleKind::custom_power) r.set("exponent", sched.exponent);
  r.set("gamma", gamma);
  add_schedule_report(r, sr);
  r.set("status", "ok");
  return sr.any_fail() ? exit_threshold : exit_ok;
}

/// Loads the config, creates the run directory, writes the effective config
/// and dispatches. Errors propagate as exceptions; the report is written
/// whenever the run itself completes or diverges.
inline ExperimentResult run_experiment(const std::string& subcommand, const std::string& config_text,
                                       const std::vector<std::string>& overrides, const std::string& out_root) {
  const Config cfg = load_config(subcommand, config_text, overrides);
  const std::string effective = cfg.effective_text();
  ExperimentResult res;
  res.run_dir = (std::filesystem::path(out_root) / (subcommand + "-" + hex64(fnv1a64(subcommand + "\n" + effective)))).string();
  std::filesystem::create_directories(res.run_dir);
  write_file_atomic((std::filesystem::path(res.run_dir) / "config.ini").string(), effective);
  const RunContext ctx{subcommand, out_root, res.run_dir, cfg};
  res.report.set("subcommand", subcommand);

  const auto start = std::chrono::steady_clock::now();
  if (subcommand == "run") res.exit_code = run_online_experiment(ctx, res);
  else if (subcommand == "baseline") res.exit_code = run_baseline_experiment(ctx, res);
  else if (subcommand == "burgers") res.exit_code = run_burgers_experiment(ctx, res);
  else if (subcommand == "gradcheck") res.exit_code = run_gradcheck_experiment(ctx, res);
  else if (subcommand == "rates") res.exit_code = run_rates_experiment(ctx, res);
  else res.exit_code = run_schedule_experiment(ctx, res);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  res.report.set("exit_code", res.exit_code);
  // Wall time varies between runs, so it goes to a separate file.
  write_file_atomic(ctx.path("timing.txt"), "seconds=" + format_number(secs) + "\n");
  res.report.write(ctx.path("report.txt"));
  return res;
}

}  // namespace adjoint_flow
