#include "bidomain/conductivity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace bidomain {

namespace {

constexpr double kSymmetryTol = 1e-14;
constexpr double kEigenvectorTol = 1e-12;
constexpr double kUnitTol = 1e-12;

}  // namespace

std::vector<Eigen::VectorXd> ellipticity_probes(int dim) {
  std::vector<Eigen::VectorXd> probes;
  // Enumerate vectors in {-1,0,1}^d whose first nonzero entry is +1.
  int total = 1;
  for (int a = 0; a < dim; ++a) total *= 3;
  for (int code = 1; code < total; ++code) {
    Eigen::VectorXd v(dim);
    int c = code;
    for (int a = 0; a < dim; ++a) {
      v[a] = static_cast<double>(c % 3) - 1.0;
      c /= 3;
    }
    int first = 0;
    while (first < dim && v[first] == 0.0) ++first;
    if (first == dim || v[first] < 0.0) continue;
    probes.push_back(v.normalized());
  }
  return probes;
}

ConductivityTensorField::ConductivityTensorField(GridSpec grid, std::vector<Tensor> tensors,
                                                 std::optional<FiberData> fibers)
    : grid_(std::move(grid)), tensors_(std::move(tensors)), fibers_(std::move(fibers)) {
  if (static_cast<Index>(tensors_.size()) != grid_.size())
    throw GridMismatch("conductivity needs one tensor per grid node");
  const int d = grid_.dim();
  const auto probes = ellipticity_probes(d);
  lower_ = std::numeric_limits<double>::infinity();
  upper_ = 0.0;
  constant_ = true;
  for (Index j = 0; j < grid_.size(); ++j) {
    Tensor& s = tensors_[j];
    // Only the leading block is meaningful.
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        if (r >= d || c >= d) s(r, c) = 0.0;
    const Eigen::MatrixXd b = s.topLeftCorner(d, d);
    if (!b.allFinite()) throw EllipticityViolation("conductivity tensor has non-finite entries");
    if ((b - b.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol)
      throw SymmetryViolation("conductivity tensor is not symmetric at node " + std::to_string(j));
    for (const auto& xi : probes) {
      const double q = xi.dot(b * xi);
      lower_ = std::min(lower_, q);
      upper_ = std::max(upper_, q);
    }
    if (j > 0 && !(s == tensors_[0])) constant_ = false;
  }
  if (!(lower_ > 0.0))
    throw EllipticityViolation("conductivity fails uniform ellipticity (lower bound " + std::to_string(lower_) + ")");

  for (int a = 0; a < d; ++a) {
    if (grid_.boundary(a) != Boundary::neumann_box) continue;
    for (Index j = 0; j < grid_.size(); ++j) {
      const Index i = grid_.unflatten(j)[a];
      if (i != 0 && i != grid_.points(a) - 1) continue;
      Eigen::Vector3d col = tensors_[j].col(a);
      col[a] = 0.0;
      if (col.norm() > kEigenvectorTol)
        throw EVViolation("wall normal of axis " + std::to_string(a) + " is not an eigenvector at node " +
                          std::to_string(j));
    }
  }
}

ConductivityTensorField ConductivityTensorField::constant(const GridSpec& grid, const Eigen::MatrixXd& tensor) {
  const int d = grid.dim();
  if (tensor.rows() != d || tensor.cols() != d) throw InvalidArgument("constant tensor must be d x d");
  Tensor t = Tensor::Zero();
  t.topLeftCorner(d, d) = tensor;
  return ConductivityTensorField(grid, std::vector<Tensor>(grid.size(), t));
}

bool ConductivityTensorField::is_diagonal() const {
  for (const auto& t : tensors_) {
    Tensor off = t;
    off.diagonal().setZero();
    if (off.cwiseAbs().maxCoeff() != 0.0) return false;
  }
  return true;
}

Eigen::MatrixXd ConductivityTensorField::block(Index node) const {
  return tensors_[node].topLeftCorner(grid_.dim(), grid_.dim());
}

ConductivityTensorField make_conductivity(const GridSpec& grid, const VectorXd& k_l, const VectorXd& k_t,
                                          const std::vector<Direction>& fibers) {
  const Index n = grid.size();
  if (k_l.size() != n || k_t.size() != n || static_cast<Index>(fibers.size()) != n)
    throw GridMismatch("fiber data must have one entry per grid node");
  const int d = grid.dim();
  std::vector<Tensor> tensors(n);
  for (Index j = 0; j < n; ++j) {
    if (!(k_l[j] > 0.0) || !(k_t[j] > 0.0))
      throw EllipticityViolation("conductances must be positive (node " + std::to_string(j) + ")");
    Direction a = fibers[j];
    for (int c = d; c < 3; ++c)
      if (a[c] != 0.0) throw InvalidArgument("fiber has components beyond the grid dimension");
    if (std::abs(a.norm() - 1.0) > kUnitTol) throw InvalidArgument("fiber direction must be a unit vector");
    Tensor s = k_t[j] * Tensor::Identity() + (k_l[j] - k_t[j]) * a * a.transpose();
    s = 0.5 * (s + s.transpose()).eval();
    tensors[j] = s;
  }
  return ConductivityTensorField(grid, std::move(tensors), FiberData{k_l, k_t, fibers});
}

std::vector<Direction> boundary_tangent_fibers(const GridSpec& grid) {
  std::vector<Direction> out(grid.size(), Direction::UnitX());
  if (grid.dim() < 2) return out;
  auto wall_distance = [&](Index j, int axis) {
    if (grid.boundary(axis) != Boundary::neumann_box) return std::numeric_limits<double>::infinity();
    const auto x = grid.coordinates(j)[axis];
    return std::min(x, grid.extent(axis) - x);
  };
  for (Index j = 0; j < grid.size(); ++j) {
    const double d0 = wall_distance(j, 0);
    const double d1 = wall_distance(j, 1);
    double weight = 0.0;  // 0 -> axis 0 direction, 1 -> axis 1 direction
    if (std::isinf(d0) && std::isinf(d1))
      weight = 0.25 + 0.5 * std::sin(2.0 * std::numbers::pi * grid.coordinates(j)[0] / grid.extent(0)) *
                          std::sin(2.0 * std::numbers::pi * grid.coordinates(j)[1] / grid.extent(1));
    else if (std::isinf(d0))
      weight = 0.0;
    else if (std::isinf(d1))
      weight = 1.0;
    else if (d0 + d1 > 0.0)
      weight = d1 / (d0 + d1);
    const double phi = 0.5 * std::numbers::pi * weight;
    out[j] = Direction(std::cos(phi), std::sin(phi), 0.0);
    if (weight == 1.0) out[j] = Direction::UnitY();
  }
  return out;
}

}  // namespace bidomain
