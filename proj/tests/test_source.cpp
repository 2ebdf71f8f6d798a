#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "adjoint_flow/source.hpp"

using namespace adjoint_flow;

namespace {
const double pi = std::acos(-1.0);
}

TEST(EvalField, LinearBasisExamples) {
  const Grid g = Grid::line(31);
  const LinearBasisSource one(sine_basis(1, 1));
  EXPECT_EQ(eval_field(one, g, std::vector<double>{0.0}).max_abs(), 0.0);

  const Field s = eval_field(one, g, std::vector<double>{1.0});
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_DOUBLE_EQ(s[k], std::sin(pi * g.coordinate(k)[0]));

  const LinearBasisSource two(sine_basis(1, 2));
  const Field f = eval_field(two, g, std::vector<double>{2.0, -1.0});
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double x = g.coordinate(k)[0];
    EXPECT_NEAR(f[k], 2.0 * std::sin(pi * x) - std::sin(2.0 * pi * x), 1e-15);
  }
}

TEST(EvalField, DimensionMismatchRejected) {
  const LinearBasisSource m(sine_basis(1, 3));
  EXPECT_THROW(eval_field(m, Grid::line(5), std::vector<double>{1.0, 2.0}), Error);
  EXPECT_THROW(grad_field(m, Grid::line(5), std::vector<double>{1.0}), Error);
}

TEST(EvalField, SuperpositionExact) {
  const Grid g = Grid::square(9, 9);
  const LinearBasisSource m(sine_basis(2, 3));
  const std::vector<double> a{0.3, -1.2, 2.0}, b{-0.7, 0.4, 1.5};
  std::vector<double> ab(3);
  for (int k = 0; k < 3; ++k) ab[k] = a[k] + b[k];
  const Field lhs = eval_field(m, g, ab), rhs = eval_field(m, g, a) + eval_field(m, g, b);
  for (std::size_t k = 0; k < lhs.size(); ++k) EXPECT_NEAR(lhs[k], rhs[k], 1e-14);
}

TEST(GradField, LinearBasisReturnsBasis) {
  const Grid g = Grid::square(6, 6);
  const auto basis = sine_basis(2, 3);
  const LinearBasisSource m(basis);
  const std::vector<Field> df = grad_field(m, g, std::vector<double>{5.0, -3.0, 0.1});
  ASSERT_EQ(df.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < g.node_count(); ++k) EXPECT_EQ(df[i][k], basis[i](g.coordinate(k)));
  EXPECT_TRUE(m.gradient_is_constant());
  EXPECT_TRUE(m.linear_in_theta());
}

TEST(GradField, TanhMatchesClosedForm) {
  const Grid g = Grid::line(7);
  const TanhBasisSource m(sine_basis(1, 2));
  const std::vector<double> th{0.5, -2.0};
  const std::vector<Field> df = grad_field(m, g, th);
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    const double x = g.coordinate(k)[0];
    EXPECT_NEAR(df[1][k], std::sin(2 * pi * x) / std::pow(std::cosh(-2.0), 2), 1e-15);
  }
  EXPECT_FALSE(m.gradient_is_constant());
}

TEST(SelfTest, BothStockModelsPass) {
  const Grid g = Grid::square(15, 15);
  const LinearBasisSource lin(sine_basis(2, 4));
  const TanhBasisSource nl(sine_basis(2, 4));
  const GradientSelfTest a = self_test(lin, g, 20, 3), b = self_test(nl, g, 20, 3);
  EXPECT_EQ(a.probes, 20u);
  EXPECT_TRUE(a.passed(1e-6)) << a.max_relative_error;
  EXPECT_TRUE(b.passed(1e-6)) << b.max_relative_error;
}

TEST(SelfTest, DetectsWrongGradient) {
  class Wrong : public SourceModel {
   public:
    Wrong() : SourceModel(1) {}
    double eval(const Point& x, std::span<const double> t) const override { return t[0] * t[0] * x[0]; }
    void grad_theta(const Point& x, std::span<const double> t, std::span<double> out) const override {
      out[0] = t[0] * x[0];
    }
    std::string name() const override { return "wrong"; }
  };
  EXPECT_FALSE(self_test(Wrong(), Grid::line(15)).passed(1e-6));
}

TEST(SourceModel, ZeroDimensionRejected) {
  EXPECT_THROW(LinearBasisSource(std::vector<BasisFunction>{}), Error);
}

TEST(SineBasis, VanishesOnBoundary) {
  const Grid g = Grid::square(8, 8);
  const LinearBasisSource m(sine_basis(2, 3));
  const Field f = eval_field(m, g, std::vector<double>{1.0, 1.0, 1.0});
  for (std::size_t k : g.boundary_nodes()) EXPECT_NEAR(f[k], 0.0, 1e-15);
}

TEST(BoundReport, TanhBoundedAndLinearGrows) {
  const Grid g = Grid::line(31);
  const TanhBasisSource nl(sine_basis(1, 2));
  const LinearBasisSource lin(sine_basis(1, 2));
  const SourceBounds small = bound_report(nl, g, 5.0), large = bound_report(nl, g, 50.0);
  // tanh saturates: ||f|| <= sum ||phi_k|| = 2 / sqrt(2).
  EXPECT_LE(large.sup_f, std::sqrt(2.0) + 1e-12);
  EXPECT_NEAR(large.sup_f, small.sup_f, 1e-3);
  EXPECT_GT(small.sup_hessian, 0.0);
  const SourceBounds l5 = bound_report(lin, g, 5.0), l50 = bound_report(lin, g, 50.0);
  EXPECT_NEAR(l50.sup_f / l5.sup_f, 10.0, 1e-9);
  EXPECT_NEAR(l5.sup_grad, l50.sup_grad, 1e-12);
  EXPECT_NEAR(l5.sup_hessian, 0.0, 1e-9);
}
