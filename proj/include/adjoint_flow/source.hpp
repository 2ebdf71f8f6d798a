#pragma once

// Parametric source terms f(x, theta) and their parameter gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "adjoint_flow/errors.hpp"
#include "adjoint_flow/mesh.hpp"

namespace adjoint_flow {

class SourceModel {
 public:
  explicit SourceModel(std::size_t d) : d_(d) {
    if (d == 0) throw Error("source model needs at least one parameter");
  }
  virtual ~SourceModel() = default;

  std::size_t dim() const noexcept { return d_; }

  virtual double eval(const Point& x, std::span<const double> theta) const = 0;
  /// Writes d partial derivatives into out.
  virtual void grad_theta(const Point& x, std::span<const double> theta, std::span<double> out) const = 0;
  /// True when grad_theta does not depend on theta (lets callers cache it).
  virtual bool gradient_is_constant() const { return false; }
  /// True when f(x, theta) = sum_k theta_k * d f / d theta_k(x).
  virtual bool linear_in_theta() const { return false; }
  virtual std::string name() const = 0;

 private:
  std::size_t d_;
};

using BasisFunction = std::function<double(const Point&)>;

/// f(x, theta) = sum_k theta_k phi_k(x).
class LinearBasisSource : public SourceModel {
 public:
  explicit LinearBasisSource(std::vector<BasisFunction> basis)
      : SourceModel(basis.size()), basis_(std::move(basis)) {}

  double eval(const Point& x, std::span<const double> theta) const override {
    double s = 0.0;
    for (std::size_t k = 0; k < basis_.size(); ++k) s += theta[k] * basis_[k](x);
    return s;
  }
  void grad_theta(const Point& x, std::span<const double>, std::span<double> out) const override {
    for (std::size_t k = 0; k < basis_.size(); ++k) out[k] = basis_[k](x);
  }
  bool gradient_is_constant() const override { return true; }
  bool linear_in_theta() const override { return true; }
  std::string name() const override { return "linear-sine"; }

 private:
  std::vector<BasisFunction> basis_;
};

/// f(x, theta) = sum_k tanh(theta_k) phi_k(x): f and its first two theta
/// derivatives are bounded uniformly in theta.
class TanhBasisSource : public SourceModel {
 public:
  explicit TanhBasisSource(std::vector<BasisFunction> basis)
      : SourceModel(basis.size()), basis_(std::move(basis)) {}

  double eval(const Point& x, std::span<const double> theta) const override {
    double s = 0.0;
    for (std::size_t k = 0; k < basis_.size(); ++k) s += std::tanh(theta[k]) * basis_[k](x);
    return s;
  }
  void grad_theta(const Point& x, std::span<const double> theta, std::span<double> out) const override {
    for (std::size_t k = 0; k < basis_.size(); ++k) {
      const double th = std::tanh(theta[k]);
      out[k] = (1.0 - th * th) * basis_[k](x);
    }
  }
  std::string name() const override { return "tanh-sine"; }

 private:
  std::vector<BasisFunction> basis_;
};

/// Sine basis vanishing on the boundary: sin(k pi x) in 1D and
/// sin(k pi x) sin(k pi y) in 2D, on the unit interval/square.
inline std::vector<BasisFunction> sine_basis(int dim, std::size_t d) {
  const double pi = std::acos(-1.0);
  std::vector<BasisFunction> basis;
  for (std::size_t k = 1; k <= d; ++k) {
    const double w = pi * static_cast<double>(k);
    if (dim == 1)
      basis.emplace_back([w](const Point& p) { return std::sin(w * p[0]); });
    else
      basis.emplace_back([w](const Point& p) { return std::sin(w * p[0]) * std::sin(w * p[1]); });
  }
  return basis;
}

inline void require_dim(const SourceModel& model, std::span<const double> theta) {
  if (theta.size() != model.dim())
    throw Error("parameter vector has dimension " + std::to_string(theta.size()) + ", model expects " +
                std::to_string(model.dim()));
}

inline Field eval_field(const SourceModel& model, const Grid& grid, std::span<const double> theta) {
  require_dim(model, theta);
  Field out(grid);
  for (std::size_t k = 0; k < grid.node_count(); ++k) out[k] = model.eval(grid.coordinate(k), theta);
  return out;
}

/// One field per parameter: d f / d theta_k sampled on the grid.
inline std::vector<Field> grad_field(const SourceModel& model, const Grid& grid, std::span<const double> theta) {
  require_dim(model, theta);
  std::vector<Field> out(model.dim(), Field(grid));
  std::vector<double> g(model.dim());
  for (std::size_t k = 0; k < grid.node_count(); ++k) {
    model.grad_theta(grid.coordinate(k), theta, g);
    for (std::size_t i = 0; i < g.size(); ++i) out[i][k] = g[i];
  }
  return out;
}

struct GradientSelfTest {
  double max_relative_error = 0.0;
  std::size_t probes = 0;
  bool passed(double tol = 1e-6) const noexcept { return max_relative_error <= tol; }
};

/// Compares grad_theta against central differences of eval at random
/// (x, theta) probes; the error is relative to max(|fd|, |grad|, 1e-3 scale).
inline GradientSelfTest self_test(const SourceModel& model, const Grid& grid, std::size_t probes = 20,
                                  unsigned seed = 1, double theta_range = 2.0, double step = 1e-5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> th(-theta_range, theta_range);
  const std::vector<std::size_t> interior = grid.interior_nodes();
  std::uniform_int_distribution<std::size_t> node(0, interior.size() - 1);
  GradientSelfTest rep;
  const std::size_t d = model.dim();
  std::vector<double> theta(d), g(d), tp(d), tm(d);
  for (std::size_t p = 0; p < probes; ++p) {
    for (double& v : theta) v = th(rng);
    const Point x = grid.coordinate(interior[node(rng)]);
    model.grad_theta(x, theta, g);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      tp = theta;
      tm = theta;
      tp[k] += step;
      tm[k] -= step;
      const double fd = (model.eval(x, tp) - model.eval(x, tm)) / (2.0 * step);
      num += (fd - g[k]) * (fd - g[k]);
      den += g[k] * g[k];
    }
    const double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-3);
    rep.max_relative_error = std::max(rep.max_relative_error, rel);
    ++rep.probes;
  }
  return rep;
}

struct SourceBounds {
  double sup_f = 0.0;
  double sup_grad = 0.0;
  double sup_hessian = 0.0;
};

/// Advisory sup-norm estimates of ||f||, ||grad f||, ||hess f|| (L2 in x)
/// over a theta probe lattice of `per_axis` points per parameter in
/// [-range, range] (capped at 4096 probes). Hessians by central
/// differences of grad_theta.
inline SourceBounds bound_report(const SourceModel& model, const Grid& grid, double range = 5.0,
                                 std::size_t per_axis = 5) {
  const std::size_t d = model.dim();
  std::size_t total = 1;
  for (std::size_t k = 0; k < d && total < 4096; ++k) total *= per_axis;
  total = std::min<std::size_t>(total, 4096);
  SourceBounds b;
  std::vector<double> theta(d), g(d), gp(d), gm(d), tp(d), tm(d);
  const double step = 1e-4;
  for (std::size_t probe = 0; probe < total; ++probe) {
    std::size_t code = probe;
    for (std::size_t k = 0; k < d; ++k) {
      const std::size_t c = code % per_axis;
      code /= per_axis;
      theta[k] = per_axis == 1 ? 0.0 : -range + 2.0 * range * static_cast<double>(c) / static_cast<double>(per_axis - 1);
    }
    double f2 = 0.0, g2 = 0.0, h2 = 0.0;
    for (std::size_t node = 0; node < grid.node_count(); ++node) {
      const Point x = grid.coordinate(node);
      const double w = grid.weight(node);
      const double f = model.eval(x, theta);
      f2 += w * f * f;
      model.grad_theta(x, theta, g);
      for (double v : g) g2 += w * v * v;
      for (std::size_t k = 0; k < d; ++k) {
        tp = theta;
        tm = theta;
        tp[k] += step;
        tm[k] -= step;
        model.grad_theta(x, tp, gp);
        model.grad_theta(x, tm, gm);
        for (std::size_t i = 0; i < d; ++i) {
          const double hk = (gp[i] - gm[i]) / (2.0 * step);
          h2 += w * hk * hk;
        }
      }
    }
    b.sup_f = std::max(b.sup_f, std::sqrt(f2));
    b.sup_grad = std::max(b.sup_grad, std::sqrt(g2));
    b.sup_hessian = std::max(b.sup_hessian, std::sqrt(h2));
  }
  return b;
}

}  // namespace adjoint_flow
