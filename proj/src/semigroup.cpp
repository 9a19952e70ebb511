#include "bidomain/semigroup.hpp"

#include <cmath>

#include "bidomain/fourier_oracle.hpp"

namespace bidomain {

ScalarField step_semigroup(const BidomainOperator& op, const ScalarField& u0, double t, SemigroupScheme scheme,
                           double dt) {
  require_same_grid(op.grid(), u0.grid());
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("semigroup time must be finite and nonnegative");
  if (t == 0.0) return u0;

  if (scheme == SemigroupScheme::spectral) {
    if (!op.grid().all_periodic() || !op.constant_coefficients())
      throw InvalidArgument("spectral stepping needs constant conductivities on a torus");
    return FourierOracle::from_operator(op).semigroup(t, u0);
  }

  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  const auto steps = static_cast<long>(std::ceil(t / dt - 1e-12));
  const double h = t / static_cast<double>(steps);
  ScalarField u = u0;
  for (long k = 0; k < steps; ++k) {
    if (scheme == SemigroupScheme::backward_euler) {
      // (1/h + A) u_new = u / h
      u = op.resolve(1.0 / h, ScalarField(u.grid(), u.values() / h));
    } else {
      // (2/h + A) u_new = (2/h - A) u
      const VectorXcd rhs = (2.0 / h) * u.values() - op.apply(u).values();
      u = op.resolve(2.0 / h, ScalarField(u.grid(), rhs));
    }
  }
  return u;
}

std::vector<double> analyticity_diagnostic(const BidomainOperator& op, const ScalarField& u0,
                                           const std::vector<double>& times) {
  require_same_grid(op.grid(), u0.grid());
  for (double t : times)
    if (!(t > 0.0)) throw InvalidArgument("diagnostic times must be positive");

  const VectorXd& w = op.weights();
  const double norm0 = weighted_norm(u0.values(), w, 2.0);
  std::vector<double> out(times.size(), 0.0);
  if (norm0 == 0.0) return out;

  const bool dense = op.grid().size() <= op.options().dense_cap;
  if (!dense && op.grid().all_periodic() && op.constant_coefficients()) {
    // Parseval on the torus: the weights are uniform.
    const auto oracle = FourierOracle::from_operator(op);
    const VectorXcd c = fft_forward(op.grid(), u0.values());
    const VectorXd& h = oracle.harmonic_symbols();
    const double c0 = c.norm();
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double t = times[k];
      const VectorXd factor = (t * h.array() * (-t * h.array()).exp()).matrix();
      out[k] = (factor.cast<Complex>().asDiagonal() * c).norm() / c0;
    }
    return out;
  }

  const auto& spec = op.spectral_decomposition();
  // Coefficients of W^{1/2} u0 in the orthonormal eigenbasis.
  const VectorXcd coeff = spec.eigenvectors.transpose().cast<Complex>() *
                          (spec.sqrt_weights.cast<Complex>().asDiagonal() * u0.values());
  const VectorXd mu = spec.eigenvalues.cwiseMax(0.0);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    const VectorXd factor = (t * mu.array() * (-t * mu.array()).exp()).matrix();
    out[k] = (factor.cast<Complex>().asDiagonal() * coeff).norm() / norm0;
  }
  return out;
}

}  // namespace bidomain
