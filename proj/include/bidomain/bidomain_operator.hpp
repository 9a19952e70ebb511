#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "bidomain/elliptic.hpp"

namespace bidomain {

struct ResolventResiduals {
  double parabolic = 0.0;           // ||lambda u + A_i u_i - s|| / ||s||
  double elliptic = 0.0;            // ||lambda u - A_e u_e - s|| / ||s||
  double extracellular_mean = 0.0;  // relative mean of u_e
  double operator_equation = 0.0;   // ||(lambda + A) u - s|| / ||s||
};

/// Solution triplet of the resolvent system, u = u_i - u_e with mean-zero u_e.
struct ResolventSolution {
  Complex lambda;
  ScalarField u;
  ScalarField u_i;
  ScalarField u_e;
  ResolventResiduals residuals;
  SolveStats stats;
};

enum class PowerSign { positive, negative };

struct FractionalResult {
  ScalarField field;
  double z_alpha_norm = 0.0;  // ||(A + a)^alpha f||_2
};

/// Eigenpairs of the weighted symmetrization S = W^{1/2} A W^{-1/2}.
struct SpectralDecomposition {
  VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  VectorXd sqrt_weights;
};

/// Throws LambdaOnCut when lambda is zero or on the negative real axis.
void require_off_cut(Complex lambda);

/// Harmonic-mean composition A = A_i (A_i + A_e)^{-1} A_e P_av.
class BidomainOperator {
public:
  BidomainOperator(ConductivityPtr sigma_i, ConductivityPtr sigma_e, LinearSolverOptions options = {});

  const GridSpec& grid() const noexcept { return intra_->grid(); }
  const VectorXd& weights() const noexcept { return intra_->weights(); }
  const ConductivityTensorField& sigma_i() const noexcept { return *sigma_i_; }
  const ConductivityTensorField& sigma_e() const noexcept { return *sigma_e_; }
  ConductivityPtr sigma_i_ptr() const noexcept { return sigma_i_; }
  ConductivityPtr sigma_e_ptr() const noexcept { return sigma_e_; }
  const EllipticOperator& intra() const noexcept { return *intra_; }
  const EllipticOperator& extra() const noexcept { return *extra_; }
  const EllipticOperator& sum() const noexcept { return *sum_; }
  const MeanZeroSolver& sum_inverse() const noexcept { return *sum_inverse_; }
  const LinearSolverOptions& options() const noexcept { return options_; }

  bool constant_coefficients() const { return sum_->constant_coefficients(); }

  ScalarField apply(const ScalarField& f) const;

  /// The equivalent form A_i P - A_i (A_i + A_e)^{-1} A_i P.
  ScalarField apply_alternative(const ScalarField& f) const;

  /// Solves lambda u + A u = s. The mean of s is resolved as mean(s)/lambda,
  /// the mean-zero part through the coupled (u, u_e) block system.
  ResolventSolution solve_resolvent(Complex lambda, const ScalarField& s) const;

  /// Only the transmembrane component of the resolvent.
  ScalarField resolve(Complex lambda, const ScalarField& s) const;

  /// u_e = (A_i + A_e)^{-1} {(s_i + s_e) - A_i P_av u}, mean zero.
  ScalarField recover_extracellular(const ScalarField& u, const ScalarField* s_i = nullptr,
                                    const ScalarField* s_e = nullptr) const;

  /// Max over random real pairs of |<Af,g> - <f,Ag>| / (||f|| ||g||).
  double adjoint_defect(int trials, std::uint64_t seed = 1) const;

  /// Min over random real f of <Af,f> / ||f||^2.
  double quadratic_form_minimum(int trials, std::uint64_t seed = 1) const;

  /// Nodal matrix of A, column by column; limited by the dense cap.
  Eigen::MatrixXd dense_matrix() const;

  /// W^{1/2} A W^{-1/2}, symmetric when A is self-adjoint.
  Eigen::MatrixXd weighted_matrix() const;

  const SpectralDecomposition& spectral_decomposition() const;

  /// (A + a)^{+-alpha} f via the spectral decomposition.
  FractionalResult fractional_apply(double alpha, double shift, const ScalarField& f,
                                    PowerSign sign = PowerSign::positive) const;

private:
  struct BlockFactor;
  std::shared_ptr<const BlockFactor> block_factor(Complex lambda) const;
  VectorXcd solve_mean_zero_part(Complex lambda, const VectorXcd& s1, VectorXcd& u_e, SolveStats& stats) const;
  bool use_block_direct() const;

  ConductivityPtr sigma_i_;
  ConductivityPtr sigma_e_;
  LinearSolverOptions options_;
  std::shared_ptr<const EllipticOperator> intra_;
  std::shared_ptr<const EllipticOperator> extra_;
  std::shared_ptr<const EllipticOperator> sum_;
  std::unique_ptr<MeanZeroSolver> sum_inverse_;

  // Block factorizations keyed by lambda.
  mutable std::mutex cache_mutex_;
  mutable std::map<std::pair<double, double>, std::shared_ptr<const BlockFactor>> cache_;
  mutable std::once_flag spectral_once_;
  mutable std::unique_ptr<SpectralDecomposition> spectral_;
  mutable std::once_flag stiffness_once_;
  mutable SparseMatrix k_i_, k_sum_;
};

/// Applies fn to the eigenvalues of a symmetric matrix (after checking its
/// relative asymmetry is below 1e-9; NonSymmetric otherwise).
template <typename Derived, typename Fn>
Eigen::MatrixXd symmetric_matrix_function(const Eigen::MatrixBase<Derived>& s, Fn&& fn) {
  const Eigen::MatrixXd m = s;
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw NonSymmetric("matrix function requested for a non-symmetric matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  const VectorXd mapped = eig.eigenvalues().unaryExpr(fn);
  return eig.eigenvectors() * mapped.asDiagonal() * eig.eigenvectors().transpose();
}

/// (S + a)^{alpha} for symmetric positive semidefinite S and a > 0.
template <typename Derived>
Eigen::MatrixXd shifted_matrix_power(const Eigen::MatrixBase<Derived>& s, double alpha, double shift) {
  return symmetric_matrix_function(s, [&](double mu) { return std::pow(std::max(mu, 0.0) + shift, alpha); });
}

}  // namespace bidomain
