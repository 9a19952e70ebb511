#include "bidomain/grid_fields.hpp"

#include <string>

namespace bidomain {

GridSpec::GridSpec(std::vector<double> extents, std::vector<Index> points, Boundary boundary)
    : GridSpec(extents, points, std::vector<Boundary>(points.size(), boundary)) {}

GridSpec::GridSpec(std::vector<double> extents, std::vector<Index> points, std::vector<Boundary> boundaries)
    : extents_(std::move(extents)), points_(std::move(points)), boundaries_(std::move(boundaries)) {
  const auto d = points_.size();
  if (d < 1 || d > 3) throw InvalidArgument("grid dimension must be 1, 2 or 3");
  if (extents_.size() != d || boundaries_.size() != d)
    throw InvalidArgument("grid extents, points and boundaries must have one entry per axis");
  for (std::size_t a = 0; a < d; ++a) {
    if (!(extents_[a] > 0.0)) throw InvalidArgument("grid extent must be positive on axis " + std::to_string(a));
    if (points_[a] < 4) throw InvalidArgument("grid needs at least 4 points on axis " + std::to_string(a));
  }
  strides_.assign(d, 1);
  for (int a = static_cast<int>(d) - 2; a >= 0; --a) strides_[a] = strides_[a + 1] * points_[a + 1];
  size_ = strides_[0] * points_[0];
}

double GridSpec::spacing(int axis) const {
  const auto n = static_cast<double>(points_[axis]);
  return boundaries_[axis] == Boundary::periodic ? extents_[axis] / n : extents_[axis] / (n - 1.0);
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim(); ++a) v *= spacing(a);
  return v;
}

double GridSpec::domain_volume() const {
  double v = 1.0;
  for (double e : extents_) v *= e;
  return v;
}

bool GridSpec::all_periodic() const {
  for (auto b : boundaries_)
    if (b != Boundary::periodic) return false;
  return true;
}

bool GridSpec::all_box() const {
  for (auto b : boundaries_)
    if (b != Boundary::neumann_box) return false;
  return true;
}

VectorXd GridSpec::node_weights() const {
  VectorXd w = VectorXd::Constant(size_, cell_volume());
  for (Index j = 0; j < size_; ++j) {
    const auto idx = unflatten(j);
    for (int a = 0; a < dim(); ++a)
      if (boundaries_[a] == Boundary::neumann_box && (idx[a] == 0 || idx[a] == points_[a] - 1)) w[j] *= 0.5;
  }
  return w;
}

std::array<Index, 3> GridSpec::unflatten(Index flat) const {
  std::array<Index, 3> idx{0, 0, 0};
  for (int a = 0; a < dim(); ++a) {
    idx[a] = flat / strides_[a];
    flat -= idx[a] * strides_[a];
  }
  return idx;
}

Index GridSpec::flatten(const std::array<Index, 3>& idx) const {
  Index flat = 0;
  for (int a = 0; a < dim(); ++a) flat += idx[a] * strides_[a];
  return flat;
}

std::array<double, 3> GridSpec::coordinates(Index flat) const {
  const auto idx = unflatten(flat);
  std::array<double, 3> x{0.0, 0.0, 0.0};
  for (int a = 0; a < dim(); ++a) x[a] = static_cast<double>(idx[a]) * spacing(a);
  return x;
}

Index GridSpec::neighbor(Index flat, int axis, Index offset) const {
  const Index n = points_[axis];
  const Index i = (flat / strides_[axis]) % n;
  Index k = i + offset;
  if (boundaries_[axis] == Boundary::periodic) {
    k = ((k % n) + n) % n;
  } else if (k < 0 || k >= n) {
    return -1;
  }
  return flat + (k - i) * strides_[axis];
}

bool GridSpec::operator==(const GridSpec& other) const {
  return points_ == other.points_ && boundaries_ == other.boundaries_ && extents_ == other.extents_;
}

ScalarField::ScalarField(GridSpec grid) : grid_(std::move(grid)), values_(VectorXcd::Zero(grid_.size())) {}

ScalarField::ScalarField(GridSpec grid, VectorXcd values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw GridMismatch("field length does not match the grid size");
}

ScalarField ScalarField::from_real(GridSpec grid, const VectorXd& values) {
  return ScalarField(std::move(grid), values.cast<Complex>());
}

ScalarField ScalarField::constant(GridSpec grid, Complex value) {
  const Index n = grid.size();
  return ScalarField(std::move(grid), VectorXcd::Constant(n, value));
}

void require_same_grid(const GridSpec& a, const GridSpec& b) {
  if (a != b) throw GridMismatch("fields live on different grids");
}

Complex mean(const ScalarField& f) { return weighted_mean(f.values(), f.grid().node_weights()); }

ScalarField project_mean_zero(const ScalarField& f) {
  return ScalarField(f.grid(), project_mean_zero(f.values(), f.grid().node_weights()));
}

double discrete_norm(const ScalarField& f, double p) { return weighted_norm(f.values(), f.grid().node_weights(), p); }

Complex inner_product(const ScalarField& f, const ScalarField& g) {
  require_same_grid(f.grid(), g.grid());
  return weighted_dot(f.values(), g.values(), f.grid().node_weights());
}

double mean_defect(const ScalarField& f) {
  const double sup = f.values().size() ? f.values().cwiseAbs().maxCoeff() : 0.0;
  if (sup == 0.0) return 0.0;
  const VectorXd w = f.grid().node_weights();
  Complex acc(0.0);
  for (Index j = 0; j < f.size(); ++j) acc += w[j] * f[j];
  return std::abs(acc) / (sup * f.grid().domain_volume());
}

namespace {

VectorXcd first_difference(const GridSpec& grid, const VectorXcd& v, int axis) {
  const double h = grid.spacing(axis);
  const Index n = grid.points(axis);
  VectorXcd out(v.size());
  for (Index j = 0; j < v.size(); ++j) {
    const Index i = (j / grid.stride(axis)) % n;
    if (grid.boundary(axis) == Boundary::neumann_box && i == 0) {
      // Second-order one-sided stencil in difference form, exact on constants.
      out[j] = (4.0 * (v[grid.neighbor(j, axis, 1)] - v[j]) - (v[grid.neighbor(j, axis, 2)] - v[j])) / (2.0 * h);
    } else if (grid.boundary(axis) == Boundary::neumann_box && i == n - 1) {
      out[j] = (4.0 * (v[j] - v[grid.neighbor(j, axis, -1)]) - (v[j] - v[grid.neighbor(j, axis, -2)])) / (2.0 * h);
    } else {
      out[j] = (v[grid.neighbor(j, axis, 1)] - v[grid.neighbor(j, axis, -1)]) / (2.0 * h);
    }
  }
  return out;
}

VectorXcd pure_second_difference(const GridSpec& grid, const VectorXcd& v, int axis) {
  const double h2 = grid.spacing(axis) * grid.spacing(axis);
  VectorXcd out(v.size());
  for (Index j = 0; j < v.size(); ++j) {
    Index up = grid.neighbor(j, axis, 1);
    Index down = grid.neighbor(j, axis, -1);
    // mirrored ghost at a wall
    if (up < 0) up = down;
    if (down < 0) down = up;
    out[j] = (v[up] - 2.0 * v[j] + v[down]) / h2;
  }
  return out;
}

}  // namespace

std::vector<ScalarField> discrete_gradient(const ScalarField& f) {
  const auto& grid = f.grid();
  std::vector<ScalarField> out;
  out.reserve(grid.dim());
  for (int a = 0; a < grid.dim(); ++a) out.emplace_back(grid, first_difference(grid, f.values(), a));
  return out;
}

std::vector<ScalarField> second_differences(const ScalarField& f) {
  const auto& grid = f.grid();
  const int d = grid.dim();
  std::vector<VectorXcd> first(d);
  for (int a = 0; a < d; ++a) first[a] = first_difference(grid, f.values(), a);
  std::vector<ScalarField> out;
  out.reserve(d * d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      if (a == b)
        out.emplace_back(grid, pure_second_difference(grid, f.values(), a));
      else
        out.emplace_back(grid, first_difference(grid, first[std::min(a, b)], std::max(a, b)));
    }
  return out;
}

VectorXd pointwise_magnitude(const std::vector<ScalarField>& components) {
  if (components.empty()) return {};
  VectorXd acc = VectorXd::Zero(components.front().size());
  for (const auto& c : components) acc += c.values().cwiseAbs2();
  return acc.cwiseSqrt();
}

}  // namespace bidomain
