#pragma once

// Uniform tensor-product grids in one and two dimensions, nodal fields on
// them, and composite-trapezoid quadrature.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "adjoint_flow/errors.hpp"
#include "adjoint_flow/io.hpp"

namespace adjoint_flow {

using Point = std::array<double, 2>;

/// Uniform grid on [lo, hi] (1D) or [lo_x, hi_x] x [lo_y, hi_y] (2D). Nodes
/// include the boundary and are ordered lexicographically with x fastest.
class Grid {
 public:
  Grid() = default;

  static Grid line(std::size_t n_interior, double lo = 0.0, double hi = 1.0) {
    return Grid(1, {n_interior, 0}, {lo, 0.0}, {hi, 0.0});
  }

  static Grid square(std::size_t nx, std::size_t ny, Point lo = {0.0, 0.0},
                     Point hi = {1.0, 1.0}) {
    return Grid(2, {nx, ny}, lo, hi);
  }

  Grid(int dim, std::array<std::size_t, 2> n_interior, Point lo, Point hi)
      : dim_(dim), n_(n_interior), lo_(lo), hi_(hi) {
    if (dim != 1 && dim != 2) throw Error("grid dimension must be 1 or 2");
    if (dim == 1) {
      n_[1] = 0;
      lo_[1] = hi_[1] = 0.0;
    }
    for (int a = 0; a < dim_; ++a) {
      if (n_[a] == 0) throw Error("grid needs at least one interior node per axis");
      if (!(hi_[a] > lo_[a])) throw Error("grid extent must be a non-empty interval");
    }
  }

  int dim() const noexcept { return dim_; }
  std::size_t n_interior(int axis) const noexcept { return n_[axis]; }
  double lo(int axis) const noexcept { return lo_[axis]; }
  double hi(int axis) const noexcept { return hi_[axis]; }

  double spacing(int axis) const noexcept {
    return (hi_[axis] - lo_[axis]) / static_cast<double>(n_[axis] + 1);
  }

  /// Nodes along an axis, boundary included. Axis 1 has one node in 1D.
  std::size_t nodes(int axis) const noexcept { return axis < dim_ ? n_[axis] + 2 : 1; }

  std::size_t node_count() const noexcept { return nodes(0) * nodes(1); }

  std::size_t interior_count() const noexcept {
    return dim_ == 1 ? n_[0] : n_[0] * n_[1];
  }

  std::size_t index(std::size_t i, std::size_t j = 0) const noexcept { return i + j * nodes(0); }

  std::size_t ix(std::size_t node) const noexcept { return node % nodes(0); }
  std::size_t iy(std::size_t node) const noexcept { return node / nodes(0); }

  Point coordinate(std::size_t node) const noexcept {
    Point p{lo_[0] + static_cast<double>(ix(node)) * spacing(0), 0.0};
    if (dim_ == 2) p[1] = lo_[1] + static_cast<double>(iy(node)) * spacing(1);
    return p;
  }

  bool is_boundary(std::size_t node) const noexcept {
    const std::size_t i = ix(node);
    if (i == 0 || i == nodes(0) - 1) return true;
    if (dim_ == 2) {
      const std::size_t j = iy(node);
      return j == 0 || j == nodes(1) - 1;
    }
    return false;
  }

  /// Trapezoid weight: product of h (interior) or h/2 (boundary) per axis.
  double weight(std::size_t node) const noexcept {
    double w = 1.0;
    const std::size_t i = ix(node);
    w *= spacing(0) * ((i == 0 || i == nodes(0) - 1) ? 0.5 : 1.0);
    if (dim_ == 2) {
      const std::size_t j = iy(node);
      w *= spacing(1) * ((j == 0 || j == nodes(1) - 1) ? 0.5 : 1.0);
    }
    return w;
  }

  std::vector<std::size_t> interior_nodes() const {
    std::vector<std::size_t> out;
    out.reserve(interior_count());
    for (std::size_t k = 0; k < node_count(); ++k)
      if (!is_boundary(k)) out.push_back(k);
    return out;
  }

  std::vector<std::size_t> boundary_nodes() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < node_count(); ++k)
      if (is_boundary(k)) out.push_back(k);
    return out;
  }

  friend bool operator==(const Grid& a, const Grid& b) noexcept {
    return a.dim_ == b.dim_ && a.n_ == b.n_ && a.lo_ == b.lo_ && a.hi_ == b.hi_;
  }

  std::string describe() const {
    std::ostringstream os;
    os << dim_ << "D grid, interior " << n_[0];
    if (dim_ == 2) os << "x" << n_[1];
    return os.str();
  }

 private:
  int dim_ = 1;
  std::array<std::size_t, 2> n_{1, 0};
  Point lo_{0.0, 0.0};
  Point hi_{1.0, 0.0};
};

/// Scalar values on every node of a grid (boundary nodes included).
class Field {
 public:
  Field() = default;
  explicit Field(Grid grid, double fill = 0.0)
      : grid_(std::move(grid)), values_(grid_.node_count(), fill) {}
  Field(Grid grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.node_count()) throw ConformabilityError("field size does not match grid");
  }

  const Grid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }
  double& operator[](std::size_t k) noexcept { return values_[k]; }
  double operator[](std::size_t k) const noexcept { return values_[k]; }
  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool boundary_is_zero() const {
    for (std::size_t k = 0; k < values_.size(); ++k)
      if (grid_.is_boundary(k) && values_[k] != 0.0) return false;
    return true;
  }

  void zero_boundary() {
    for (std::size_t k = 0; k < values_.size(); ++k)
      if (grid_.is_boundary(k)) values_[k] = 0.0;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  Field& operator+=(const Field& o) {
    require_conformable(o);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
    return *this;
  }
  Field& operator-=(const Field& o) {
    require_conformable(o);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
    return *this;
  }
  Field& operator*=(double s) noexcept {
    for (double& v : values_) v *= s;
    return *this;
  }

  /// this += s * o
  Field& axpy(double s, const Field& o) {
    require_conformable(o);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += s * o.values_[k];
    return *this;
  }

  void require_conformable(const Field& o) const {
    if (!(grid_ == o.grid_)) throw ConformabilityError("fields live on different grids");
  }

 private:
  Grid grid_;
  std::vector<double> values_;
};

inline Field operator+(Field a, const Field& b) { return a += b; }
inline Field operator-(Field a, const Field& b) { return a -= b; }
inline Field operator*(double s, Field a) { return a *= s; }

inline bool conformable(const Field& f, const Field& g) noexcept { return f.grid() == g.grid(); }

/// Composite-trapezoid approximation of the integral of f*g over the domain.
inline double inner_product(const Field& f, const Field& g) {
  f.require_conformable(g);
  const Grid& grid = f.grid();
  double sum = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) sum += grid.weight(k) * f[k] * g[k];
  return sum;
}

inline double norm_l2(const Field& f) { return std::sqrt(std::max(0.0, inner_product(f, f))); }

inline Field sample_function(const Grid& grid, const std::function<double(const Point&)>& fn) {
  Field out(grid);
  for (std::size_t k = 0; k < grid.node_count(); ++k) out[k] = fn(grid.coordinate(k));
  return out;
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// CSV with header `x,value` or `x,y,value`, lexicographic rows.
inline std::string field_to_csv(const Field& f) {
  const Grid& grid = f.grid();
  std::string out = grid.dim() == 1 ? "x,value\n" : "x,y,value\n";
  for (std::size_t k = 0; k < f.size(); ++k) {
    const Point p = grid.coordinate(k);
    out += format_number(p[0]);
    out += ',';
    if (grid.dim() == 2) {
      out += format_number(p[1]);
      out += ',';
    }
    out += format_number(f[k]);
    out += '\n';
  }
  return out;
}

inline void write_field_csv(const Field& f, const std::string& path) {
  write_file_atomic(path, field_to_csv(f));
}

/// Parses a field CSV written for `grid`; coordinates must match the grid.
inline Field field_from_csv(const std::string& text, const Grid& grid) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("field CSV is empty");
  const std::string expected = grid.dim() == 1 ? "x,value" : "x,y,value";
  if (line != expected) throw Error("field CSV header mismatch: " + line);
  Field out(grid);
  std::size_t k = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (k >= grid.node_count()) throw ConformabilityError("field CSV has too many rows");
    std::vector<double> cols;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = line.find(',', pos);
      const std::string cell = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      cols.push_back(std::stod(cell));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (cols.size() != static_cast<std::size_t>(grid.dim()) + 1)
      throw Error("field CSV row has wrong column count");
    const Point p = grid.coordinate(k);
    for (int a = 0; a < grid.dim(); ++a)
      if (std::abs(cols[a] - p[a]) > 1e-12 * (1.0 + std::abs(p[a])))
        throw ConformabilityError("field CSV coordinates do not match grid");
    out[k++] = cols.back();
  }
  if (k != grid.node_count()) throw ConformabilityError("field CSV has too few rows");
  return out;
}

inline Field read_field_csv(const std::string& path, const Grid& grid) {
  return field_from_csv(read_file(path), grid);
}

}  // namespace adjoint_flow
