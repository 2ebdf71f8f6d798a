#pragma once

// Independent dense oracles shared by the unit and acceptance tests.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "adjoint_flow/elliptic.hpp"
#include "adjoint_flow/mesh.hpp"

namespace test_support {

/// Interior block of the operator as a dense matrix, rows/cols in interior order.
inline Eigen::MatrixXd dense_interior(const adjoint_flow::DiscreteOperator& op) {
  const adjoint_flow::Grid& g = op.grid();
  std::vector<long> local(g.node_count(), -1);
  long n = 0;
  for (std::size_t k = 0; k < g.node_count(); ++k)
    if (!g.is_boundary(k)) local[k] = n++;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (const auto& t : op.triplets())
    if (local[t.row] >= 0 && local[t.col] >= 0) m(local[t.row], local[t.col]) += t.value;
  return m;
}

inline Eigen::VectorXd interior_vector(const adjoint_flow::Field& f) {
  const adjoint_flow::Grid& g = f.grid();
  Eigen::VectorXd v(static_cast<Eigen::Index>(g.interior_count()));
  Eigen::Index n = 0;
  for (std::size_t k = 0; k < g.node_count(); ++k)
    if (!g.is_boundary(k)) v(n++) = f[k];
  return v;
}

inline adjoint_flow::Field from_interior(const adjoint_flow::Grid& g, const Eigen::VectorXd& v) {
  adjoint_flow::Field f(g);
  Eigen::Index n = 0;
  for (std::size_t k = 0; k < g.node_count(); ++k)
    if (!g.is_boundary(k)) f[k] = v(n++);
  return f;
}

/// Trapezoid weights built from the grid geometry alone.
inline Eigen::VectorXd interior_weights(const adjoint_flow::Grid& g) {
  double w = 1.0;
  for (int a = 0; a < g.dim(); ++a) w *= g.spacing(a);
  return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(g.interior_count()), w);
}

/// J(theta) = 1/2 |u - h|_w^2 + gamma/2 |theta|^2 with u from a dense LU solve
/// and f = sum theta_k basis_k.
struct DenseQuadraticObjective {
  Eigen::MatrixXd a;
  std::vector<Eigen::VectorXd> basis;
  Eigen::VectorXd h;
  Eigen::VectorXd w;
  double gamma = 0.0;

  double operator()(const std::vector<double>& theta) const {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(h.size());
    for (std::size_t k = 0; k < theta.size(); ++k) f += theta[k] * basis[k];
    const Eigen::VectorXd r = a.partialPivLu().solve(f) - h;
    double reg = 0.0;
    for (double t : theta) reg += t * t;
    return 0.5 * r.dot(w.asDiagonal() * r) + 0.5 * gamma * reg;
  }
};

/// Cyclic coordinate golden-section search with shrinking brackets. Slow
/// but shares nothing with the gradient machinery under test.
inline std::vector<double> brute_force_minimize(const std::function<double(const std::vector<double>&)>& f,
                                                std::vector<double> x, double radius, int sweeps = 60) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int s = 0; s < sweeps; ++s) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      double lo = x[k] - radius, hi = x[k] + radius;
      auto at = [&](double v) {
        std::vector<double> y = x;
        y[k] = v;
        return f(y);
      };
      double c = hi - phi * (hi - lo), d = lo + phi * (hi - lo);
      double fc = at(c), fd = at(d);
      for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + std::abs(x[k])); ++it) {
        if (fc < fd) {
          hi = d, d = c, fd = fc;
          c = hi - phi * (hi - lo), fc = at(c);
        } else {
          lo = c, c = d, fc = fd;
          d = lo + phi * (hi - lo), fd = at(d);
        }
      }
      x[k] = 0.5 * (lo + hi);
    }
    radius = std::max(radius * 0.5, 1e-6);
  }
  return x;
}

}  // namespace test_support
