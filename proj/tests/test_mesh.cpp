#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "adjoint_flow/mesh.hpp"

using namespace adjoint_flow;

namespace {
const double pi = std::acos(-1.0);

Field random_field(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Field f(g);
  for (double& v : f.values()) v = d(rng);
  return f;
}
}  // namespace

TEST(Grid, SpacingAndNodeCount) {
  const Grid g = Grid::line(3);
  EXPECT_DOUBLE_EQ(g.spacing(0), 0.25);
  EXPECT_EQ(g.node_count(), 5u);
  EXPECT_EQ(g.interior_count(), 3u);

  const Grid sq = Grid::square(4, 6, {0.0, -1.0}, {2.0, 1.0});
  EXPECT_DOUBLE_EQ(sq.spacing(0), 2.0 / 5.0);
  EXPECT_DOUBLE_EQ(sq.spacing(1), 2.0 / 7.0);
  EXPECT_EQ(sq.node_count(), 6u * 8u);
  EXPECT_EQ(sq.interior_count(), 4u * 6u);
}

TEST(Grid, LexicographicOrderingXFastest) {
  const Grid g = Grid::square(2, 2);
  EXPECT_EQ(g.index(1, 0), 1u);
  EXPECT_EQ(g.index(0, 1), 4u);
  EXPECT_EQ(g.ix(5), 1u);
  EXPECT_EQ(g.iy(5), 1u);
  EXPECT_FALSE(g.is_boundary(5));
  EXPECT_TRUE(g.is_boundary(3));
}

TEST(Grid, RejectsDegenerateInput) {
  EXPECT_THROW(Grid::line(0), Error);
  EXPECT_THROW(Grid::line(4, 1.0, 1.0), Error);
  EXPECT_THROW(Grid(3, {2, 2}, {0, 0}, {1, 1}), Error);
}

TEST(InnerProduct, ZeroField) {
  const Grid g = Grid::square(7, 5);
  EXPECT_EQ(inner_product(Field(g), Field(g)), 0.0);
}

TEST(InnerProduct, SineSquaredIsHalf) {
  const Grid g = Grid::line(255);
  const Field s = sample_function(g, [](const Point& p) { return std::sin(pi * p[0]); });
  EXPECT_NEAR(inner_product(s, s), 0.5, 1e-4);
  EXPECT_NEAR(norm_l2(s), std::sqrt(0.5), 1e-4);
}

TEST(InnerProduct, SineModesOrthogonal) {
  const Grid g = Grid::line(255);
  const Field s1 = sample_function(g, [](const Point& p) { return std::sin(pi * p[0]); });
  const Field s2 = sample_function(g, [](const Point& p) { return std::sin(2 * pi * p[0]); });
  EXPECT_NEAR(inner_product(s1, s2), 0.0, 1e-10);
}

TEST(InnerProduct, NonConformableThrows) {
  EXPECT_THROW(inner_product(Field(Grid::line(3)), Field(Grid::line(4))), ConformabilityError);
  EXPECT_THROW(inner_product(Field(Grid::line(3)), Field(Grid::square(3, 3))), ConformabilityError);
}

TEST(InnerProduct, SymmetricAndBilinearRandomized) {
  std::mt19937_64 rng(3);
  for (const Grid& g : {Grid::line(17), Grid::square(9, 6)}) {
    for (int trial = 0; trial < 20; ++trial) {
      const Field f = random_field(g, rng), h = random_field(g, rng), k = random_field(g, rng);
      const double a = 1.7, b = -0.3;
      EXPECT_NEAR(inner_product(f, h), inner_product(h, f), 1e-15);
      EXPECT_NEAR(inner_product(a * f + b * h, k), a * inner_product(f, k) + b * inner_product(h, k), 1e-13);
    }
  }
}

TEST(InnerProduct, ExactForProductsOfLinears) {
  // Linear in x times linear in y is bilinear, which the tensor trapezoid rule integrates exactly.
  const Grid sq = Grid::square(5, 7);
  const Field fx = sample_function(sq, [](const Point& p) { return 1.0 + p[0]; });
  const Field fy = sample_function(sq, [](const Point& p) { return 2.0 - 3.0 * p[1]; });
  EXPECT_NEAR(inner_product(fx, fy), 1.5 * 0.5, 1e-14);

  // Same-axis product (1 + 2x)(3 - x) = 3 + 5x - 2x^2 is quadratic; the
  // trapezoid error is exactly -2 * h^2 / 6.
  const Grid g = Grid::line(6);
  const Field f = sample_function(g, [](const Point& p) { return 1.0 + 2.0 * p[0]; });
  const Field h = sample_function(g, [](const Point& p) { return 3.0 - p[0]; });
  const double hx = g.spacing(0);
  EXPECT_NEAR(inner_product(f, h), 3.0 + 2.5 - 2.0 / 3.0 - hx * hx / 3.0, 1e-14);
}

TEST(InnerProduct, SecondOrderUnderRefinement) {
  auto err = [](std::size_t n) {
    const Grid g = Grid::line(n);
    const Field f = sample_function(g, [](const Point& p) { return std::exp(p[0]); });
    return std::abs(inner_product(f, f) - 0.5 * (std::exp(2.0) - 1.0));
  };
  // h halves when n_interior + 1 doubles.
  const double e1 = err(15), e2 = err(31), e3 = err(63);
  EXPECT_NEAR(std::log2(e1 / e2), 2.0, 0.05);
  EXPECT_NEAR(std::log2(e2 / e3), 2.0, 0.05);
}

TEST(NormL2, ZeroAndHomogeneity) {
  const Grid g = Grid::line(255);
  EXPECT_EQ(norm_l2(Field(g)), 0.0);
  const Field s = sample_function(g, [](const Point& p) { return std::sin(pi * p[0]); });
  EXPECT_NEAR(norm_l2(-3.0 * s), 3.0 * norm_l2(s), 1e-14);
}

TEST(SampleFunction, Examples) {
  const Field one = sample_function(Grid::square(3, 2), [](const Point&) { return 1.0; });
  for (double v : one.values()) EXPECT_EQ(v, 1.0);

  const Field id = sample_function(Grid::line(3), [](const Point& p) { return p[0]; });
  const std::vector<double> expected{0.0, 0.25, 0.5, 0.75, 1.0};
  EXPECT_EQ(id.values(), expected);

  const Field s = sample_function(Grid::line(3), [](const Point& p) { return std::sin(pi * p[0]); });
  EXPECT_DOUBLE_EQ(s[2], 1.0);
}

TEST(Field, BoundaryHelpersAndArithmetic) {
  const Grid g = Grid::square(3, 3);
  Field f(g, 2.0);
  EXPECT_FALSE(f.boundary_is_zero());
  f.zero_boundary();
  EXPECT_TRUE(f.boundary_is_zero());
  EXPECT_EQ(f.max_abs(), 2.0);
  Field h = f + f;
  h -= f;
  EXPECT_EQ(h.values(), f.values());
  EXPECT_THROW(f += Field(Grid::square(3, 4)), ConformabilityError);
  EXPECT_THROW(Field(g, std::vector<double>(3, 0.0)), ConformabilityError);
}

TEST(FieldCsv, RoundTripIsExact) {
  std::mt19937_64 rng(9);
  for (const Grid& g : {Grid::line(11), Grid::square(4, 3, {-1.0, 0.0}, {1.0, 0.5})}) {
    const Field f = random_field(g, rng);
    const std::string csv = field_to_csv(f);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), g.dim() == 1 ? "x,value" : "x,y,value");
    const Field back = field_from_csv(csv, g);
    EXPECT_EQ(back.values(), f.values());
  }
}

TEST(FieldCsv, RejectsWrongGrid) {
  const Field f(Grid::line(5), 1.0);
  EXPECT_THROW(field_from_csv(field_to_csv(f), Grid::line(6)), ConformabilityError);
  EXPECT_THROW(field_from_csv(field_to_csv(f), Grid::square(5, 5)), Error);
  EXPECT_THROW(field_from_csv("", Grid::line(5)), Error);
}
