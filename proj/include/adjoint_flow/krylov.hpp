#pragma once

// Matrix-free Krylov iterations. `Op` is any callable with signature
// void(const std::vector<double>& x, std::vector<double>& y) computing y = A x.

#include <cmath>
#include <cstddef>
#include <vector>

namespace adjoint_flow::krylov {

struct Result {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  /// Set by cg when a direction with p'Ap <= 0 is met (operator not SPD).
  bool indefinite = false;
  double curvature = 0.0;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

/// Conjugate gradients from the initial guess in x. Optional diagonal
/// preconditioner given as inverse diagonal (empty = none).
template <class Op>
Result cg(const Op& apply, const std::vector<double>& b, std::vector<double>& x, double tol,
          std::size_t max_iter, const std::vector<double>& inv_diag = {}) {
  const std::size_t n = b.size();
  Result res;
  const double bnorm = norm(b);
  if (bnorm == 0.0) {
    x.assign(n, 0.0);
    res.converged = true;
    return res;
  }
  std::vector<double> r(n), z(n), p(n), ap(n);
  apply(x, ap);
  for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - ap[k];
  auto precond = [&](const std::vector<double>& in, std::vector<double>& out) {
    if (inv_diag.empty()) {
      out = in;
    } else {
      for (std::size_t k = 0; k < n; ++k) out[k] = inv_diag[k] * in[k];
    }
  };
  precond(r, z);
  p = z;
  double rz = dot(r, z);
  res.relative_residual = norm(r) / bnorm;
  while (res.relative_residual > tol) {
    if (res.iterations >= max_iter) return res;
    apply(p, ap);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) {
      res.indefinite = true;
      res.curvature = pap / dot(p, p);
      return res;
    }
    const double step = rz / pap;
    for (std::size_t k = 0; k < n; ++k) {
      x[k] += step * p[k];
      r[k] -= step * ap[k];
    }
    ++res.iterations;
    res.relative_residual = norm(r) / bnorm;
    precond(r, z);
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
  }
  res.converged = true;
  return res;
}

/// BiCGSTAB (van der Vorst) from the initial guess in x.
template <class Op>
Result bicgstab(const Op& apply, const std::vector<double>& b, std::vector<double>& x, double tol,
                std::size_t max_iter, const std::vector<double>& inv_diag = {}) {
  const std::size_t n = b.size();
  Result res;
  const double bnorm = norm(b);
  if (bnorm == 0.0) {
    x.assign(n, 0.0);
    res.converged = true;
    return res;
  }
  auto precond = [&](const std::vector<double>& in, std::vector<double>& out) {
    if (inv_diag.empty()) {
      out = in;
    } else {
      for (std::size_t k = 0; k < n; ++k) out[k] = inv_diag[k] * in[k];
    }
  };
  std::vector<double> r(n), r0(n), p(n, 0.0), v(n, 0.0), s(n), t(n), phat(n), shat(n);
  apply(x, t);
  for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - t[k];
  r0 = r;
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  res.relative_residual = norm(r) / bnorm;
  while (res.relative_residual > tol) {
    if (res.iterations >= max_iter) return res;
    const double rho_next = dot(r0, r);
    if (rho_next == 0.0) {
      // Breakdown: restart the shadow residual.
      r0 = r;
      p.assign(n, 0.0);
      v.assign(n, 0.0);
      rho = alpha = omega = 1.0;
      continue;
    }
    const double beta = (rho_next / rho) * (alpha / omega);
    rho = rho_next;
    for (std::size_t k = 0; k < n; ++k) p[k] = r[k] + beta * (p[k] - omega * v[k]);
    precond(p, phat);
    apply(phat, v);
    alpha = rho / dot(r0, v);
    for (std::size_t k = 0; k < n; ++k) s[k] = r[k] - alpha * v[k];
    ++res.iterations;
    if (norm(s) / bnorm <= tol) {
      for (std::size_t k = 0; k < n; ++k) x[k] += alpha * phat[k];
      r = s;
      res.relative_residual = norm(r) / bnorm;
      break;
    }
    precond(s, shat);
    apply(shat, t);
    const double tt = dot(t, t);
    omega = tt > 0.0 ? dot(t, s) / tt : 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      x[k] += alpha * phat[k] + omega * shat[k];
      r[k] = s[k] - omega * t[k];
    }
    res.relative_residual = norm(r) / bnorm;
    if (omega == 0.0) return res;
  }
  // Recompute the true residual; the recurrence can drift.
  apply(x, t);
  for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - t[k];
  res.relative_residual = norm(r) / bnorm;
  res.converged = res.relative_residual <= tol;
  return res;
}

}  // namespace adjoint_flow::krylov
