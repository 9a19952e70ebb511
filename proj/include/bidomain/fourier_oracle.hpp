#pragma once

#include <array>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bidomain/bidomain_operator.hpp"
#include "bidomain/elliptic.hpp"

namespace bidomain {

/// Multidimensional DFT over every axis of a periodic grid. The forward
/// transform is unnormalized, the inverse carries 1/N.
VectorXcd fft_forward(const GridSpec& grid, const VectorXcd& values);
VectorXcd fft_inverse(const GridSpec& grid, const VectorXcd& coefficients);

/// Signed integer wavenumber of an FFT slot along each axis.
std::array<Index, 3> lattice_mode(const GridSpec& grid, Index slot);

/// FFT slot holding the given signed wavenumber.
Index lattice_slot(const GridSpec& grid, const std::array<Index, 3>& mode);

/// Angular frequency 2 pi m / L of an FFT slot.
Eigen::VectorXd lattice_frequency(const GridSpec& grid, Index slot);

/// Symbol of a constant-coefficient periodic stencil, measured by applying
/// the operator to a unit impulse and transforming the response.
VectorXd measured_symbol(const EllipticOperator& op);

/// <sigma k, k>.
double continuous_symbol(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& k);

/// a_i a_e / (a_i + a_e), zero when both vanish.
inline double harmonic_mean(double a_i, double a_e) {
  const double s = a_i + a_e;
  return s > 0.0 ? a_i * a_e / s : 0.0;
}

struct ConstantCoeffProblem {
  Eigen::MatrixXd sigma_i;
  Eigen::MatrixXd sigma_e;
  double theta = 0.0;  // phase of e^{i theta}
  GridSpec grid;

  void validate() const;
};

/// Exact constant-coefficient solutions on the torus through the stencil
/// symbols: harmonic-mean resolvent, semigroup, extracellular recovery and
/// the dual problem of the whole-space uniqueness argument.
class FourierOracle {
public:
  explicit FourierOracle(ConstantCoeffProblem problem);

  /// Oracle matching a constant-coefficient operator on a periodic grid.
  static FourierOracle from_operator(const BidomainOperator& op, double theta = 0.0);

  const ConstantCoeffProblem& problem() const noexcept { return problem_; }
  const GridSpec& grid() const noexcept { return problem_.grid; }
  const VectorXd& intra_symbol() const noexcept { return a_i_; }
  const VectorXd& extra_symbol() const noexcept { return a_e_; }
  const VectorXd& harmonic_symbols() const noexcept { return h_; }

  /// h(k) for a signed integer wavenumber; h(0) = 0.
  double harmonic_symbol(const std::array<Index, 3>& mode) const;

  /// Multiplies by h(k).
  ScalarField apply(const ScalarField& f) const;

  /// u^(k) = s^(k) / (lambda + h(k)).
  ScalarField resolvent(Complex lambda, const ScalarField& s) const;

  /// u^(k) = exp(-t h(k)) u0^(k).
  ScalarField semigroup(double t, const ScalarField& u0) const;

  /// u_e^(k) = -a_i / (a_i + a_e) u^(k), zero mode dropped.
  ScalarField extracellular(const ScalarField& u) const;

  /// Gradient by i k multiplication (Nyquist slots zeroed).
  std::vector<ScalarField> spectral_gradient(const ScalarField& f) const;

  /// Solves e^{i theta}(phi_i + phi_e) + A_i phi_i = psi_i and
  ///        e^{i theta}(phi_i + phi_e) + A_e phi_e = psi_e.
  std::pair<ScalarField, ScalarField> dual_solution(double theta, const ScalarField& psi_i,
                                                    const ScalarField& psi_e) const;
  std::pair<ScalarField, ScalarField> dual_solution(const ScalarField& psi_i, const ScalarField& psi_e) const {
    return dual_solution(problem_.theta, psi_i, psi_e);
  }

  /// Residuals ||e^{i theta}(phi_i+phi_e) + A phi - psi||_2 of both dual
  /// equations, evaluated with the finite-difference stencils.
  std::pair<double, double> dual_residuals(double theta, const ScalarField& phi_i, const ScalarField& phi_e,
                                           const ScalarField& psi_i, const ScalarField& psi_e) const;

  /// Minimum over nonzero lattice modes of |D| / (a_i a_e + a_i + a_e),
  /// D = a_i a_e + e^{i theta}(a_i + a_e).
  double denominator_margin(double theta) const;

private:
  void check_grid(const ScalarField& f) const;

  ConstantCoeffProblem problem_;
  std::shared_ptr<const EllipticOperator> intra_;
  std::shared_ptr<const EllipticOperator> extra_;
  VectorXd a_i_, a_e_, h_;
};

/// Even reflection of a box axis onto a periodic axis of twice the extent
/// (2(n-1) points).
ScalarField even_extension(const ScalarField& f, int axis);

/// Reflects every box axis.
ScalarField even_extension(const ScalarField& f);

/// Restriction of an extended field back to the original box grid.
ScalarField restrict_to_box(const ScalarField& extended, const GridSpec& box);

/// Grid obtained by reflecting the given box axes.
GridSpec extended_grid(const GridSpec& box, int axis);

}  // namespace bidomain
