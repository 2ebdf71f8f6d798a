#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "adjoint_flow/baseline.hpp"

using namespace adjoint_flow;

namespace {
LinearProblem stock() {
  const Grid g = Grid::line(31);
  const DiscreteOperator op = assemble(g, EllipticCoefficients::constant(1.0));
  const auto m = std::make_shared<LinearBasisSource>(sine_basis(1, 3));
  SolverConfig cfg;
  cfg.tol = 1e-12;
  const Field h = solve_steady(op, eval_field(*m, g, std::vector<double>{1.0, -0.5, 0.25}), cfg);
  return LinearProblem(op, m, TargetProfile{h}, cfg);
}
constexpr double gamma_reg = 0.01;
}  // namespace

TEST(Offline, ErrorHalvesWithinContractionBound) {
  const LinearProblem p = stock();
  const QuadraticReference ref = quadratic_reference(p, gamma_reg);
  OfflineRunConfig cfg;
  cfg.theta0 = ThetaVector({0.0, 0.0, 0.0}, gamma_reg);
  cfg.step = 1.0 / ref.L;
  cfg.theta_star = ref.theta_star;
  const auto k_half = static_cast<std::size_t>(std::ceil(std::log(2.0) / std::log(1.0 / (1.0 - ref.q / ref.L))));
  cfg.iterations = k_half;
  const TraceRecord tr = run_offline(p, cfg);
  ASSERT_EQ(tr.rows.size(), k_half + 1);
  EXPECT_LE(tr.rows.back().theta_err, 0.5 * tr.rows.front().theta_err);
  for (std::size_t k = 1; k < tr.rows.size(); ++k)
    EXPECT_LE(tr.rows[k].theta_err, (1.0 - ref.q / ref.L) * tr.rows[k - 1].theta_err + 1e-12);
}

TEST(Offline, ObjectiveMonotoneAndCostIncreasing) {
  const LinearProblem p = stock();
  const QuadraticReference ref = quadratic_reference(p, gamma_reg);
  OfflineRunConfig cfg;
  cfg.theta0 = ThetaVector({3.0, 3.0, -3.0}, gamma_reg);
  cfg.step = 1.0 / ref.L;
  cfg.iterations = 30;
  const TraceRecord tr = run_offline(p, cfg);
  EXPECT_TRUE(tr.has_inner_iters);
  for (std::size_t k = 1; k < tr.rows.size(); ++k) {
    EXPECT_LE(tr.rows[k].J, tr.rows[k - 1].J * (1.0 + 1e-12));
    EXPECT_GT(tr.rows[k].cum_inner_iters, tr.rows[k - 1].cum_inner_iters);
  }
}

TEST(Offline, StartingAtOptimumStaysPut) {
  const LinearProblem p = stock();
  const QuadraticReference ref = quadratic_reference(p, gamma_reg);
  OfflineRunConfig cfg;
  cfg.theta0 = ThetaVector(ref.theta_star, gamma_reg);
  cfg.step = 1.0 / ref.L;
  cfg.iterations = 10;
  const TraceRecord tr = run_offline(p, cfg);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(tr.rows.back().theta[i], ref.theta_star[i], 1e-10);
}

TEST(Offline, ScheduleDrivesStep) {
  const LinearProblem p = stock();
  OfflineRunConfig cfg;
  cfg.theta0 = ThetaVector({0.0, 0.0, 0.0}, gamma_reg);
  cfg.schedule = Schedule::inverse_linear(10.0);
  cfg.iterations = 3;
  const TraceRecord tr = run_offline(p, cfg);
  for (std::size_t k = 0; k < tr.rows.size(); ++k) EXPECT_DOUBLE_EQ(tr.rows[k].alpha, 10.0 / (1.0 + static_cast<double>(k)));
}

TEST(Offline, NeedsStepOrSchedule) {
  const LinearProblem p = stock();
  OfflineRunConfig cfg;
  cfg.theta0 = ThetaVector({0.0, 0.0, 0.0}, gamma_reg);
  EXPECT_THROW(run_offline(p, cfg), Error);
}

TEST(Offline, StepBeyondTwoOverLGrowsGeometrically) {
  const LinearProblem p = stock();
  const QuadraticReference ref = quadratic_reference(p, gamma_reg);
  OfflineRunConfig cfg;
  cfg.theta0 = ThetaVector({1.0, 1.0, 1.0}, gamma_reg);
  cfg.step = 3.0 / ref.L;
  cfg.theta_star = ref.theta_star;
  cfg.iterations = 40;
  const TraceRecord tr = run_offline(p, cfg);
  // The stiffest direction is amplified by |1 - 3| = 2 per iteration.
  EXPECT_NEAR(tr.rows[40].theta_err / tr.rows[39].theta_err, 2.0, 1e-6);
}

TEST(Offline, AgreesWithOnlineLimit) {
  const LinearProblem p = stock();
  const QuadraticReference ref = quadratic_reference(p, gamma_reg);
  OfflineRunConfig off;
  off.theta0 = ThetaVector({1.0, -0.5, 0.25}, gamma_reg);
  off.step = 1.0 / ref.L;
  off.iterations = 400;
  const TraceRecord tr = run_offline(p, off);

  OnlineRunConfig on;
  on.schedule = Schedule::inverse_linear(2.0 / ref.q);
  on.dt = make_step_size(p.op);
  on.theta0 = off.theta0;
  on.horizon = 200.0;
  on.log_per_decade = 2;
  const OnlineRun run = run_online(p, on);
  EXPECT_LE(theta_distance(tr.rows.back().theta, run.final_state.theta.values), 1e-4);
}

TEST(FirstRowBelow, FindsFirstCrossing) {
  TraceRecord tr;
  for (double j : {4.0, 2.0, 0.5, 0.7, 0.1}) {
    TraceRow r;
    r.J = j;
    tr.rows.push_back(r);
  }
  EXPECT_EQ(first_row_below(tr, "J", 1.0), std::optional<std::size_t>(2));
  EXPECT_EQ(first_row_below(tr, "J", 0.5), std::optional<std::size_t>(2));
  EXPECT_FALSE(first_row_below(tr, "J", 0.01).has_value());
}
