#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "bidomain/errors.hpp"

namespace bidomain::detail {

/// Restarted GMRES with modified Gram-Schmidt and complex Givens rotations.
/// `apply` maps a vector to its operator image. Relative residuals are
/// appended to `history`.
template <typename Apply>
Eigen::VectorXcd gmres(Apply&& apply, const Eigen::VectorXcd& b, double tol, Eigen::Index restart,
                       Eigen::Index max_iterations, std::vector<double>& history) {
  using Eigen::Index;
  using Eigen::VectorXcd;
  using Complex = std::complex<double>;

  const Index n = b.size();
  VectorXcd x = VectorXcd::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return x;

  Index total = 0;
  while (total < max_iterations) {
    const VectorXcd r = b - apply(x);
    const double beta = r.norm();
    if (beta / bnorm <= tol) return x;

    const Index m = std::min(restart, max_iterations - total);
    std::vector<VectorXcd> basis{r / beta};
    Eigen::MatrixXcd hess = Eigen::MatrixXcd::Zero(m + 1, m);
    std::vector<Complex> cs(m), sn(m);
    VectorXcd g = VectorXcd::Zero(m + 1);
    g[0] = beta;

    Index used = 0;
    double rel = 1.0;
    for (Index k = 0; k < m; ++k) {
      VectorXcd v = apply(basis[k]);
      for (Index i = 0; i <= k; ++i) {
        hess(i, k) = basis[i].dot(v);
        v -= hess(i, k) * basis[i];
      }
      const double next = v.norm();
      hess(k + 1, k) = next;
      for (Index i = 0; i < k; ++i) {
        const Complex t = std::conj(cs[i]) * hess(i, k) + std::conj(sn[i]) * hess(i + 1, k);
        hess(i + 1, k) = -sn[i] * hess(i, k) + cs[i] * hess(i + 1, k);
        hess(i, k) = t;
      }
      const double denom = std::hypot(std::abs(hess(k, k)), next);
      cs[k] = hess(k, k) / denom;
      sn[k] = hess(k + 1, k) / denom;
      hess(k, k) = denom;
      hess(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = std::conj(cs[k]) * g[k];
      ++total;
      used = k + 1;
      rel = std::abs(g[k + 1]) / bnorm;
      history.push_back(rel);
      if (rel <= tol || next == 0.0) break;
      basis.push_back(v / next);
    }

    const VectorXcd y = hess.topLeftCorner(used, used).triangularView<Eigen::Upper>().solve(g.head(used));
    for (Index i = 0; i < used; ++i) x += y[i] * basis[i];
    if (rel <= tol && (b - apply(x)).norm() / bnorm <= 10.0 * tol) return x;
  }
  throw LinearSolveDivergence("GMRES hit its iteration cap", history);
}

}  // namespace bidomain::detail
