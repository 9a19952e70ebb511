#pragma once

#include <vector>

#include "bidomain/bidomain_operator.hpp"

namespace bidomain {

enum class SemigroupScheme { backward_euler, crank_nicolson, spectral };

/// Approximates exp(-tA) u0. The implicit schemes take ceil(t/dt) equal
/// substeps, each one resolvent solve; `spectral` multiplies Fourier modes by
/// exp(-t h(k)) and needs constant conductivities on a torus.
ScalarField step_semigroup(const BidomainOperator& op, const ScalarField& u0, double t, SemigroupScheme scheme,
                           double dt = 1e-3);

/// t ||A exp(-tA) u0||_2 / ||u0||_2 for each t, computed exactly: by the dense
/// eigendecomposition under the dense cap, otherwise through the Fourier
/// symbol when the coefficients are constant on a torus. Bounded by 1/e for
/// self-adjoint nonnegative A.
std::vector<double> analyticity_diagnostic(const BidomainOperator& op, const ScalarField& u0,
                                           const std::vector<double>& times);

}  // namespace bidomain
