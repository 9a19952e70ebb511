#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "bidomain/errors.hpp"

namespace bidomain {

using Index = Eigen::Index;
using Complex = std::complex<double>;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline constexpr double kInfNorm = std::numeric_limits<double>::infinity();

enum class Boundary : std::uint8_t { periodic = 0, neumann_box = 1 };

/// Uniform axis-aligned grid in 1 to 3 dimensions. Each axis is either
/// periodic (n points, spacing L/n) or a closed box with nodes on both
/// walls (n points, spacing L/(n-1)). Storage is row-major: axis 0 varies
/// slowest.
class GridSpec {
public:
  GridSpec() = default;
  GridSpec(std::vector<double> extents, std::vector<Index> points, Boundary boundary);
  GridSpec(std::vector<double> extents, std::vector<Index> points, std::vector<Boundary> boundaries);

  int dim() const noexcept { return static_cast<int>(points_.size()); }
  double extent(int axis) const { return extents_[axis]; }
  Index points(int axis) const { return points_[axis]; }
  Boundary boundary(int axis) const { return boundaries_[axis]; }
  const std::vector<double>& extents() const noexcept { return extents_; }
  const std::vector<Index>& point_counts() const noexcept { return points_; }
  const std::vector<Boundary>& boundaries() const noexcept { return boundaries_; }

  double spacing(int axis) const;
  Index size() const noexcept { return size_; }
  Index stride(int axis) const { return strides_[axis]; }

  /// Product of the spacings.
  double cell_volume() const;
  double domain_volume() const;

  bool all_periodic() const;
  bool all_box() const;

  /// Quadrature weight of every node: the cell volume, halved once for
  /// each box axis on which the node sits on a wall. Sums to |Omega|.
  VectorXd node_weights() const;

  std::array<Index, 3> unflatten(Index flat) const;
  Index flatten(const std::array<Index, 3>& idx) const;
  std::array<double, 3> coordinates(Index flat) const;

  /// Neighbour along `axis` shifted by `offset`, wrapping on periodic axes.
  /// Returns -1 when a box wall is crossed.
  Index neighbor(Index flat, int axis, Index offset) const;

  bool operator==(const GridSpec& other) const;
  bool operator!=(const GridSpec& other) const { return !(*this == other); }

private:
  std::vector<double> extents_;
  std::vector<Index> points_;
  std::vector<Boundary> boundaries_;
  std::vector<Index> strides_;
  Index size_ = 0;
};

/// Complex-valued grid function. Real data is promoted on construction.
class ScalarField {
public:
  ScalarField() = default;
  explicit ScalarField(GridSpec grid);
  ScalarField(GridSpec grid, VectorXcd values);

  static ScalarField from_real(GridSpec grid, const VectorXd& values);
  static ScalarField constant(GridSpec grid, Complex value);

  template <typename Fn>
  static ScalarField sample(const GridSpec& grid, Fn&& fn) {
    ScalarField f(grid);
    for (Index j = 0; j < grid.size(); ++j) f.values_[j] = fn(grid.coordinates(j));
    return f;
  }

  const GridSpec& grid() const noexcept { return grid_; }
  const VectorXcd& values() const noexcept { return values_; }
  VectorXcd& values() noexcept { return values_; }
  Index size() const noexcept { return values_.size(); }
  Complex operator[](Index j) const { return values_[j]; }

private:
  GridSpec grid_;
  VectorXcd values_;
};

void require_same_grid(const GridSpec& a, const GridSpec& b);

// Weighted primitives on raw coefficient vectors. The field overloads below
// forward here with the grid's node weights.

template <typename Derived>
typename Derived::Scalar weighted_mean(const Eigen::MatrixBase<Derived>& values, const VectorXd& weights) {
  using Scalar = typename Derived::Scalar;
  Scalar acc(0);
  for (Index j = 0; j < values.size(); ++j) acc += weights[j] * values[j];
  return acc / weights.sum();
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> project_mean_zero(
    const Eigen::MatrixBase<Derived>& values, const VectorXd& weights) {
  const auto mean = weighted_mean(values, weights);
  return (values.array() - mean).matrix();
}

/// (sum |f|^p w)^(1/p), or max |f| for p = inf.
template <typename Derived>
double weighted_norm(const Eigen::MatrixBase<Derived>& values, const VectorXd& weights, double p) {
  if (!(p > 1.0)) throw InvalidArgument("discrete_norm: p must exceed 1");
  if (p == kInfNorm) return values.size() == 0 ? 0.0 : values.cwiseAbs().maxCoeff();
  double scale = values.size() == 0 ? 0.0 : values.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  double acc = 0.0;
  for (Index j = 0; j < values.size(); ++j) acc += weights[j] * std::pow(std::abs(values[j]) / scale, p);
  return scale * std::pow(acc, 1.0 / p);
}

/// Volume-weighted inner product <f, g> = sum f conj(g) w.
template <typename DA, typename DB>
Complex weighted_dot(const Eigen::MatrixBase<DA>& f, const Eigen::MatrixBase<DB>& g, const VectorXd& weights) {
  Complex acc(0.0);
  for (Index j = 0; j < f.size(); ++j) acc += weights[j] * Complex(f[j]) * std::conj(Complex(g[j]));
  return acc;
}

Complex mean(const ScalarField& f);
ScalarField project_mean_zero(const ScalarField& f);
double discrete_norm(const ScalarField& f, double p);
Complex inner_product(const ScalarField& f, const ScalarField& g);

/// Relative mean defect |sum f w| / (||f||_inf |Omega|); 0 for the zero field.
double mean_defect(const ScalarField& f);

/// Second-order central differences, one-sided second order at box walls.
std::vector<ScalarField> discrete_gradient(const ScalarField& f);

/// All second differences: the pure ones with a mirrored ghost at box walls,
/// the mixed ones as composed first differences. Returns the full d*d
/// Hessian stencil in row-major order so the Frobenius magnitude is direct.
std::vector<ScalarField> second_differences(const ScalarField& f);

/// Pointwise Euclidean magnitude of a list of component fields.
VectorXd pointwise_magnitude(const std::vector<ScalarField>& components);

}  // namespace bidomain
