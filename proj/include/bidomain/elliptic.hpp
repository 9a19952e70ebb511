#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "bidomain/conductivity.hpp"
#include "bidomain/grid_fields.hpp"

namespace bidomain {

using SparseMatrix = Eigen::SparseMatrix<double>;
using ConductivityPtr = std::shared_ptr<const ConductivityTensorField>;

enum class OperatorKind { elliptic_i, elliptic_e, elliptic_sum, bidomain };
enum class Representation { assembled_sparse, matrix_free };

struct LinearSolverOptions {
  enum class Method { automatic, direct, iterative };

  double tolerance = 1e-10;
  Index max_iterations = 0;  // 0 selects 10 * N
  Index assembly_cap = Index{1} << 16;
  Method method = Method::automatic;
  Index dense_cap = 2048;  // largest grid for dense eigendecompositions
};

/// Zero-flux operator -div(sigma grad .) on a structured grid.
///
/// The discretization is the node-based energy form
///   E(u) = sum_cells vol / 2^d * sum_corners g_c^T sigma(x_c) g_c,
/// where g_c is the one-sided gradient built from the cell edges leaving
/// corner c. The stiffness K is the Hessian of E / 2 and the operator is
/// W^{-1} K with W the node weights. K is symmetric positive semidefinite
/// with kernel spanned by constants, and on box axes the form produces the
/// mirrored-ghost zero-flux closure. For diagonal sigma it reduces to the
/// standard (2d+1)-point stencil with arithmetic face averages.
class EllipticOperator {
public:
  EllipticOperator(OperatorKind kind, std::vector<ConductivityPtr> conductivities);

  static EllipticOperator intra(ConductivityPtr sigma_i);
  static EllipticOperator extra(ConductivityPtr sigma_e);
  static EllipticOperator sum(ConductivityPtr sigma_i, ConductivityPtr sigma_e);

  OperatorKind kind() const noexcept { return kind_; }
  const GridSpec& grid() const noexcept { return grid_; }
  const VectorXd& weights() const noexcept { return weights_; }
  const std::vector<ConductivityPtr>& conductivities() const noexcept { return sigmas_; }

  /// True when all referenced tensor fields are spatially constant.
  bool constant_coefficients() const;

  ScalarField apply(const ScalarField& f) const;

  /// K v without the weight division.
  VectorXcd apply_stiffness(const VectorXcd& v) const;
  VectorXd apply_stiffness(const VectorXd& v) const;

  SparseMatrix stiffness(Index cap = Index{1} << 16) const;

  /// Rows of W^{-1} K; matches apply() on every basis vector.
  SparseMatrix assemble(Index cap = Index{1} << 16) const;

  VectorXd stiffness_diagonal() const;

private:
  template <typename Vec>
  Vec apply_stiffness_impl(const Vec& v) const;

  OperatorKind kind_;
  std::vector<ConductivityPtr> sigmas_;
  GridSpec grid_;
  VectorXd weights_;
  std::vector<Tensor> effective_;                // summed tensor per node
  std::vector<std::array<Index, 8>> cells_;      // corner nodes, bit a = +1 along axis a
};

/// Matrix Market coordinate export of an assembled operator.
void write_matrix_market(const std::string& path, const SparseMatrix& m);

struct SolveStats {
  Index iterations = 0;
  double relative_residual = 0.0;
  std::vector<double> history;
  bool direct = false;
};

/// Inverse of a zero-flux operator restricted to mean-zero data.
///
/// Under the assembly cap the stiffness is bordered by the weight vector
/// and factorized once; otherwise a Jacobi-preconditioned conjugate
/// gradient runs with the iterate re-projected to mean zero each step.
class MeanZeroSolver {
public:
  explicit MeanZeroSolver(std::shared_ptr<const EllipticOperator> op, LinearSolverOptions options = {});

  const EllipticOperator& op() const noexcept { return *op_; }
  const LinearSolverOptions& options() const noexcept { return options_; }

  /// Solves op(u) = f for mean-zero u. Throws NotMeanZero when f is not.
  ScalarField solve(const ScalarField& f, SolveStats* stats = nullptr) const;

  /// Same, on raw coefficients without the mean-zero precondition check.
  VectorXcd solve_values(const VectorXcd& f, SolveStats* stats = nullptr) const;

  bool uses_direct() const;

private:
  VectorXcd solve_direct(const VectorXcd& f) const;
  VectorXcd solve_cg(const VectorXcd& f, SolveStats* stats) const;

  std::shared_ptr<const EllipticOperator> op_;
  LinearSolverOptions options_;
  mutable std::once_flag factor_once_;
  mutable std::unique_ptr<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>> lu_;
  mutable double border_scale_ = 1.0;
};

/// (A_i + A_e)^{-1} on mean-zero data.
ScalarField solve_sum_inverse(const MeanZeroSolver& solver, const ScalarField& f, SolveStats* stats = nullptr);

}  // namespace bidomain
