#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "bidomain/grid_fields.hpp"

namespace bidomain {

/// Tensors are stored padded to 3x3; only the leading d x d block is used.
using Tensor = Eigen::Matrix3d;
using Direction = Eigen::Vector3d;

struct FiberData {
  VectorXd longitudinal;           // k^l per node
  VectorXd transverse;             // k^t per node
  std::vector<Direction> fibers;   // unit vector a per node
};

/// Symmetric conductivity tensor at every grid node, validated for uniform
/// ellipticity, symmetry and (on box walls) the normal-eigenvector condition.
class ConductivityTensorField {
public:
  ConductivityTensorField(GridSpec grid, std::vector<Tensor> tensors, std::optional<FiberData> fibers = std::nullopt);

  static ConductivityTensorField constant(const GridSpec& grid, const Eigen::MatrixXd& tensor);

  const GridSpec& grid() const noexcept { return grid_; }
  const Tensor& at(Index node) const { return tensors_[node]; }
  const std::vector<Tensor>& tensors() const noexcept { return tensors_; }
  const std::optional<FiberData>& fibers() const noexcept { return fibers_; }

  /// Probe-set ellipticity bounds.
  double lower_bound() const noexcept { return lower_; }
  double upper_bound() const noexcept { return upper_; }

  /// True when every node carries the same tensor.
  bool is_constant() const noexcept { return constant_; }
  bool is_diagonal() const;

  /// Leading d x d block of the tensor at `node`.
  Eigen::MatrixXd block(Index node) const;

private:
  GridSpec grid_;
  std::vector<Tensor> tensors_;
  std::optional<FiberData> fibers_;
  double lower_ = 0.0;
  double upper_ = 0.0;
  bool constant_ = false;
};

/// Finite probe set: the canonical basis plus every +-1 diagonal direction
/// (one representative per sign pair), normalized.
std::vector<Eigen::VectorXd> ellipticity_probes(int dim);

/// sigma = k_t I + (k_l - k_t) a (x) a at every node.
ConductivityTensorField make_conductivity(const GridSpec& grid, const VectorXd& k_l, const VectorXd& k_t,
                                          const std::vector<Direction>& fibers);

/// Fiber field tangent to every box wall: a blend of the wall tangents
/// weighted by distance to the walls (2D boxes), or axis 0 otherwise.
std::vector<Direction> boundary_tangent_fibers(const GridSpec& grid);

}  // namespace bidomain
