#pragma once

// Second-order elliptic operators in divergence form,
//   A u = -div(a grad u) + b . grad u + c u,
// discretized by central finite differences on a uniform grid, together
// with their discrete adjoints and a coercivity estimate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "adjoint_flow/errors.hpp"
#include "adjoint_flow/io.hpp"
#include "adjoint_flow/krylov.hpp"
#include "adjoint_flow/mesh.hpp"

namespace adjoint_flow {

/// Symmetric 2x2 diffusion tensor. In 1D only `xx` is used.
struct Tensor2 {
  double xx = 1.0;
  double xy = 0.0;
  double yy = 1.0;
};

struct EllipticCoefficients {
  std::function<Tensor2(const Point&)> a = [](const Point&) { return Tensor2{}; };
  std::function<Point(const Point&)> b = [](const Point&) { return Point{0.0, 0.0}; };
  std::function<double(const Point&)> c = [](const Point&) { return 0.0; };

  static EllipticCoefficients constant(double diffusion, Point advection = {0.0, 0.0},
                                       double reaction = 0.0) {
    EllipticCoefficients k;
    k.a = [diffusion](const Point&) { return Tensor2{diffusion, 0.0, diffusion}; };
    k.b = [advection](const Point&) { return advection; };
    k.c = [reaction](const Point&) { return reaction; };
    return k;
  }
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Sparse stencil over all grid nodes. Rows of boundary nodes are assembled
/// with the same formula so that the transpose is well defined, but only
/// interior rows act: `apply` returns zero on the boundary and treats the
/// input's boundary values as zero (homogeneous Dirichlet) unless boundary
/// data is passed explicitly.
class DiscreteOperator {
 public:
  DiscreteOperator() = default;

  DiscreteOperator(Grid grid, std::vector<Triplet> triplets, bool is_adjoint = false,
                   std::vector<std::string> warnings = {})
      : grid_(std::move(grid)), is_adjoint_(is_adjoint), warnings_(std::move(warnings)) {
    build(std::move(triplets));
  }

  const Grid& grid() const noexcept { return grid_; }
  bool is_adjoint() const noexcept { return is_adjoint_; }
  bool is_symmetric() const noexcept { return symmetric_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  std::size_t nonzeros() const noexcept { return val_.size(); }

  /// Entry (row, col) in node numbering, zero if absent.
  double entry(std::size_t row, std::size_t col) const {
    for (std::size_t k = ptr_[row]; k < ptr_[row + 1]; ++k)
      if (col_[k] == col) return val_[k];
    return 0.0;
  }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> out;
    out.reserve(val_.size());
    for (std::size_t r = 0; r + 1 < ptr_.size(); ++r)
      for (std::size_t k = ptr_[r]; k < ptr_[r + 1]; ++k) out.push_back({r, col_[k], val_[k]});
    return out;
  }

  /// y = A x on interior rows using interior columns only; boundary of y is zero.
  void apply_raw(const std::vector<double>& x, std::vector<double>& y) const {
    y.assign(x.size(), 0.0);
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      double s = 0.0;
      for (std::size_t k = iptr_[r]; k < iptr_[r + 1]; ++k) s += ival_[k] * x[icol_[k]];
      y[rows_[r]] = s;
    }
  }

  /// y += contributions of the boundary values of g to interior rows.
  void add_boundary_raw(const std::vector<double>& g, std::vector<double>& y) const {
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      double s = 0.0;
      for (std::size_t k = bptr_[r]; k < bptr_[r + 1]; ++k) s += bval_[k] * g[bcol_[k]];
      y[rows_[r]] += s;
    }
  }

  /// Inverse diagonal on interior nodes (1 on the boundary), for Jacobi.
  std::vector<double> inverse_diagonal() const {
    std::vector<double> d(grid_.node_count(), 1.0);
    for (std::size_t r : rows_) {
      const double v = entry(r, r);
      d[r] = v != 0.0 ? 1.0 / v : 1.0;
    }
    return d;
  }

  /// Largest Gershgorin radius (row sum of |entries|) over interior rows.
  double gershgorin() const {
    double m = 0.0;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      double s = 0.0;
      for (std::size_t k = iptr_[r]; k < iptr_[r + 1]; ++k) s += std::abs(ival_[k]);
      m = std::max(m, s);
    }
    return m;
  }

 private:
  void build(std::vector<Triplet> t) {
    const std::size_t n = grid_.node_count();
    std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    ptr_.assign(n + 1, 0);
    col_.clear();
    val_.clear();
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (t[k].row >= n || t[k].col >= n) throw Error("operator entry outside grid");
      if (!col_.empty() && k > 0 && t[k].row == t[k - 1].row && t[k].col == t[k - 1].col) {
        val_.back() += t[k].value;
        continue;
      }
      col_.push_back(t[k].col);
      val_.push_back(t[k].value);
      ++ptr_[t[k].row + 1];
    }
    for (std::size_t r = 0; r < n; ++r) ptr_[r + 1] += ptr_[r];

    rows_ = grid_.interior_nodes();
    iptr_.assign(1, 0);
    bptr_.assign(1, 0);
    icol_.clear();
    ival_.clear();
    bcol_.clear();
    bval_.clear();
    for (std::size_t r : rows_) {
      for (std::size_t k = ptr_[r]; k < ptr_[r + 1]; ++k) {
        if (grid_.is_boundary(col_[k])) {
          bcol_.push_back(col_[k]);
          bval_.push_back(val_[k]);
        } else {
          icol_.push_back(col_[k]);
          ival_.push_back(val_[k]);
        }
      }
      iptr_.push_back(icol_.size());
      bptr_.push_back(bcol_.size());
    }

    double scale = 0.0;
    for (double v : ival_) scale = std::max(scale, std::abs(v));
    symmetric_ = true;
    for (std::size_t r = 0; r < rows_.size() && symmetric_; ++r)
      for (std::size_t k = iptr_[r]; k < iptr_[r + 1]; ++k)
        if (std::abs(ival_[k] - entry(icol_[k], rows_[r])) > 1e-13 * scale) {
          symmetric_ = false;
          break;
        }
  }

  Grid grid_;
  bool is_adjoint_ = false;
  bool symmetric_ = true;
  std::vector<std::string> warnings_;
  // Full node-indexed CSR.
  std::vector<std::size_t> ptr_, col_;
  std::vector<double> val_;
  // Interior rows split into interior-column and boundary-column parts.
  std::vector<std::size_t> rows_;
  std::vector<std::size_t> iptr_, icol_, bptr_, bcol_;
  std::vector<double> ival_, bval_;
};

namespace detail {

inline void check_ellipticity(const Grid& grid, const EllipticCoefficients& k) {
  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    const Point p = grid.coordinate(node);
    const Tensor2 a = k.a(p);
    const bool ok = grid.dim() == 1 ? a.xx > 0.0 : (a.xx > 0.0 && a.xx * a.yy - a.xy * a.xy > 0.0);
    if (!ok) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "diffusion tensor not positive definite at (%g, %g)", p[0], p[1]);
      throw EllipticityError(buf);
    }
  }
}

}  // namespace detail

/// Central-difference assembly. The divergence term uses arithmetic
/// half-node averages a(x +- h/2); cross terms of a 2D tensor use nodal
/// values on the 9-point stencil; advection is centered.
inline DiscreteOperator assemble(const Grid& grid, const EllipticCoefficients& k) {
  detail::check_ellipticity(grid, k);
  std::vector<std::string> warnings;
  std::vector<Triplet> t;
  const int dim = grid.dim();
  const std::size_t nx = grid.nodes(0), ny = dim == 2 ? grid.nodes(1) : 1;
  const double hx = grid.spacing(0);
  const double hy = dim == 2 ? grid.spacing(1) : 1.0;
  bool negative_reaction = false;

  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    const std::size_t i = grid.ix(node), j = grid.iy(node);
    const Point p = grid.coordinate(node);
    const bool has_w = i > 0, has_e = i + 1 < nx;
    const bool has_s = dim == 2 && j > 0, has_n = dim == 2 && j + 1 < ny;

    const double a_e = 0.5 * (k.a(p).xx + k.a({p[0] + hx, p[1]}).xx);
    const double a_w = 0.5 * (k.a(p).xx + k.a({p[0] - hx, p[1]}).xx);
    double diag = (a_e + a_w) / (hx * hx);
    if (has_e) t.push_back({node, node + 1, -a_e / (hx * hx)});
    if (has_w) t.push_back({node, node - 1, -a_w / (hx * hx)});

    const Point b = k.b(p);
    if (b[0] != 0.0) {
      if (has_e) t.push_back({node, node + 1, b[0] / (2.0 * hx)});
      if (has_w) t.push_back({node, node - 1, -b[0] / (2.0 * hx)});
    }

    if (dim == 2) {
      const double a_n = 0.5 * (k.a(p).yy + k.a({p[0], p[1] + hy}).yy);
      const double a_s = 0.5 * (k.a(p).yy + k.a({p[0], p[1] - hy}).yy);
      diag += (a_n + a_s) / (hy * hy);
      if (has_n) t.push_back({node, node + nx, -a_n / (hy * hy)});
      if (has_s) t.push_back({node, node - nx, -a_s / (hy * hy)});
      if (b[1] != 0.0) {
        if (has_n) t.push_back({node, node + nx, b[1] / (2.0 * hy)});
        if (has_s) t.push_back({node, node - nx, -b[1] / (2.0 * hy)});
      }
      const double xy_e = k.a({p[0] + hx, p[1]}).xy, xy_w = k.a({p[0] - hx, p[1]}).xy;
      const double xy_n = k.a({p[0], p[1] + hy}).xy, xy_s = k.a({p[0], p[1] - hy}).xy;
      if (xy_e != 0.0 || xy_w != 0.0 || xy_n != 0.0 || xy_s != 0.0) {
        const double s = 1.0 / (4.0 * hx * hy);
        if (has_e && has_n) t.push_back({node, node + 1 + nx, -(xy_e + xy_n) * s});
        if (has_e && has_s) t.push_back({node, node + 1 - nx, (xy_e + xy_s) * s});
        if (has_w && has_n) t.push_back({node, node - 1 + nx, (xy_w + xy_n) * s});
        if (has_w && has_s) t.push_back({node, node - 1 - nx, -(xy_w + xy_s) * s});
      }
    }

    const double c = k.c(p);
    if (c < 0.0 && !grid.is_boundary(node)) negative_reaction = true;
    diag += c;
    t.push_back({node, node, diag});
  }
  if (negative_reaction) warnings.emplace_back("reaction coefficient negative at some node; dissipativity may fail");
  return DiscreteOperator(grid, std::move(t), false, std::move(warnings));
}

/// Matrix-vector product with homogeneous Dirichlet data: boundary values
/// of f are ignored.
inline Field apply(const DiscreteOperator& op, const Field& f) {
  if (!(f.grid() == op.grid())) throw ConformabilityError("field and operator live on different grids");
  Field out(op.grid());
  op.apply_raw(f.values(), out.values());
  return out;
}

/// Matrix-vector product where the boundary values of `f` act as Dirichlet data.
inline Field apply_with_boundary(const DiscreteOperator& op, const Field& f) {
  Field out = apply(op, f);
  op.add_boundary_raw(f.values(), out.values());
  return out;
}

/// Exact transpose of the assembled matrix.
inline DiscreteOperator adjoint(const DiscreteOperator& op) {
  std::vector<Triplet> t = op.triplets();
  for (Triplet& e : t) std::swap(e.row, e.col);
  return DiscreteOperator(op.grid(), std::move(t), !op.is_adjoint(), op.warnings());
}

/// 1/2 (A + A^T).
inline DiscreteOperator symmetric_part(const DiscreteOperator& op) {
  std::vector<Triplet> t = op.triplets();
  const std::size_t n = t.size();
  t.reserve(2 * n);
  for (std::size_t k = 0; k < n; ++k) {
    t[k].value *= 0.5;
    t.push_back({t[k].col, t[k].row, t[k].value});
  }
  return DiscreteOperator(op.grid(), std::move(t));
}

/// 1/2 (A - A^T).
inline DiscreteOperator skew_part(const DiscreteOperator& op) {
  std::vector<Triplet> t = op.triplets();
  const std::size_t n = t.size();
  t.reserve(2 * n);
  for (std::size_t k = 0; k < n; ++k) {
    t[k].value *= 0.5;
    t.push_back({t[k].col, t[k].row, -t[k].value});
  }
  return DiscreteOperator(op.grid(), std::move(t));
}

enum class CoercivityMethod { inverse_power_iteration, analytic };

struct CoercivityEstimate {
  double lambda_min = 0.0;
  CoercivityMethod method = CoercivityMethod::inverse_power_iteration;
  std::size_t iterations = 0;

  /// (A u, u) >= lambda ||u||^2 with lambda > 0.
  bool dissipative() const noexcept { return lambda_min > 0.0; }
};

namespace detail {

/// Deterministic start vector with full support on interior nodes.
inline std::vector<double> start_vector(const Grid& grid, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.5, 1.5);
  std::vector<double> x(grid.node_count(), 0.0);
  for (std::size_t k = 0; k < x.size(); ++k)
    if (!grid.is_boundary(k)) x[k] = dist(rng);
  return x;
}

}  // namespace detail

/// Smallest eigenvalue of the symmetric part of `op` by inverse power
/// iteration with CG inner solves. If the symmetric part is not positive
/// definite the returned estimate is non-positive (dissipativity violated).
inline CoercivityEstimate estimate_coercivity(const DiscreteOperator& op, double tol = 1e-10,
                                              std::size_t max_iter = 1000) {
  const DiscreteOperator sym = symmetric_part(op);
  auto mv = [&sym](const std::vector<double>& x, std::vector<double>& y) { sym.apply_raw(x, y); };
  std::vector<double> x = detail::start_vector(op.grid(), 7);
  const std::size_t n_dof = op.grid().interior_count();
  std::vector<double> y(x.size()), ax(x.size());
  double nx = krylov::norm(x);
  for (double& v : x) v /= nx;
  double mu_prev = 0.0;
  CoercivityEstimate est;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    y.assign(x.size(), 0.0);
    const krylov::Result r = krylov::cg(mv, x, y, 1e-13, 20 * n_dof + 100);
    if (r.indefinite) {
      est.lambda_min = std::min(0.0, r.curvature);
      est.iterations = it;
      return est;
    }
    if (!r.converged) throw NonConvergenceError("coercivity estimate: inner solve failed", r.relative_residual, r.iterations);
    const double ny = krylov::norm(y);
    for (std::size_t k = 0; k < y.size(); ++k) x[k] = y[k] / ny;
    mv(x, ax);
    const double mu = krylov::dot(x, ax);
    est.lambda_min = mu;
    est.iterations = it;
    if (it > 1 && std::abs(mu - mu_prev) <= tol * std::abs(mu)) return est;
    mu_prev = mu;
  }
  throw NonConvergenceError("coercivity estimate did not converge", std::abs(est.lambda_min - mu_prev), max_iter);
}

/// Exact smallest eigenvalue of the constant-coefficient operator
/// -D Laplacian + c with homogeneous Dirichlet data on the given grid.
inline CoercivityEstimate analytic_laplacian_coercivity(const Grid& grid, double diffusion = 1.0,
                                                        double reaction = 0.0) {
  CoercivityEstimate est;
  est.method = CoercivityMethod::analytic;
  const double pi = std::acos(-1.0);
  double lam = 0.0;
  for (int a = 0; a < grid.dim(); ++a) {
    const double h = grid.spacing(a);
    const double len = grid.hi(a) - grid.lo(a);
    lam += (2.0 / (h * h)) * (1.0 - std::cos(pi * h / len));
  }
  est.lambda_min = diffusion * lam + reaction;
  return est;
}

/// Interior block in MatrixMarket coordinate format (1-based interior numbering).
inline std::string to_matrix_market(const DiscreteOperator& op) {
  const Grid& g = op.grid();
  std::vector<std::size_t> local(g.node_count(), 0);
  std::size_t n = 0;
  for (std::size_t k = 0; k < g.node_count(); ++k)
    if (!g.is_boundary(k)) local[k] = ++n;
  std::vector<Triplet> entries;
  for (const Triplet& t : op.triplets())
    if (!g.is_boundary(t.row) && !g.is_boundary(t.col)) entries.push_back(t);
  std::string out = "%%MatrixMarket matrix coordinate real general\n";
  out += std::to_string(n) + " " + std::to_string(n) + " " + std::to_string(entries.size()) + "\n";
  for (const Triplet& t : entries)
    out += std::to_string(local[t.row]) + " " + std::to_string(local[t.col]) + " " + format_number(t.value) + "\n";
  return out;
}

inline void write_matrix_market(const DiscreteOperator& op, const std::string& path) {
  write_file_atomic(path, to_matrix_market(op));
}

}  // namespace adjoint_flow
