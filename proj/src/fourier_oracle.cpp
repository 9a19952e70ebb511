#include "bidomain/fourier_oracle.hpp"

#include <cmath>
#include <numbers>

#include <unsupported/Eigen/FFT>

namespace bidomain {

namespace {

void require_periodic(const GridSpec& grid) {
  if (!grid.all_periodic()) throw InvalidArgument("Fourier oracle needs a fully periodic grid");
}

VectorXcd fft_axes(const GridSpec& grid, VectorXcd values, bool forward) {
  Eigen::FFT<double> fft;
  for (int a = 0; a < grid.dim(); ++a) {
    const Index n = grid.points(a);
    const Index stride = grid.stride(a);
    std::vector<Complex> line(n), out(n);
    for (Index base = 0; base < grid.size(); ++base) {
      if ((base / stride) % n != 0) continue;
      for (Index k = 0; k < n; ++k) line[k] = values[base + k * stride];
      if (forward)
        fft.fwd(out, line);
      else
        fft.inv(out, line);
      for (Index k = 0; k < n; ++k) values[base + k * stride] = out[k];
    }
  }
  return values;
}

}  // namespace

VectorXcd fft_forward(const GridSpec& grid, const VectorXcd& values) {
  require_periodic(grid);
  return fft_axes(grid, values, true);
}

VectorXcd fft_inverse(const GridSpec& grid, const VectorXcd& coefficients) {
  require_periodic(grid);
  return fft_axes(grid, coefficients, false);
}

std::array<Index, 3> lattice_mode(const GridSpec& grid, Index slot) {
  auto idx = grid.unflatten(slot);
  for (int a = 0; a < grid.dim(); ++a) {
    const Index n = grid.points(a);
    if (idx[a] > n / 2) idx[a] -= n;
  }
  return idx;
}

Index lattice_slot(const GridSpec& grid, const std::array<Index, 3>& mode) {
  std::array<Index, 3> idx{0, 0, 0};
  for (int a = 0; a < grid.dim(); ++a) {
    const Index n = grid.points(a);
    idx[a] = ((mode[a] % n) + n) % n;
  }
  return grid.flatten(idx);
}

Eigen::VectorXd lattice_frequency(const GridSpec& grid, Index slot) {
  const auto m = lattice_mode(grid, slot);
  Eigen::VectorXd k(grid.dim());
  for (int a = 0; a < grid.dim(); ++a) k[a] = 2.0 * std::numbers::pi * static_cast<double>(m[a]) / grid.extent(a);
  return k;
}

VectorXd measured_symbol(const EllipticOperator& op) {
  const auto& grid = op.grid();
  require_periodic(grid);
  if (!op.constant_coefficients()) throw InvalidArgument("stencil symbol needs constant coefficients");
  VectorXcd impulse = VectorXcd::Zero(grid.size());
  impulse[0] = 1.0;
  const VectorXcd response = op.apply(ScalarField(grid, impulse)).values();
  return fft_forward(grid, response).real();
}

double continuous_symbol(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& k) { return k.dot(sigma * k); }

void ConstantCoeffProblem::validate() const {
  require_periodic(grid);
  const int d = grid.dim();
  if (sigma_i.rows() != d || sigma_i.cols() != d || sigma_e.rows() != d || sigma_e.cols() != d)
    throw InvalidArgument("constant tensors must be d x d");
  if (!(std::abs(theta) < std::numbers::pi)) throw ThetaOutOfSector("|theta| must be below pi");
  // Tensor validation (symmetry, ellipticity) happens in ConductivityTensorField.
}

FourierOracle::FourierOracle(ConstantCoeffProblem problem) : problem_(std::move(problem)) {
  problem_.validate();
  auto sigma_i = std::make_shared<const ConductivityTensorField>(
      ConductivityTensorField::constant(problem_.grid, problem_.sigma_i));
  auto sigma_e = std::make_shared<const ConductivityTensorField>(
      ConductivityTensorField::constant(problem_.grid, problem_.sigma_e));
  intra_ = std::make_shared<const EllipticOperator>(EllipticOperator::intra(sigma_i));
  extra_ = std::make_shared<const EllipticOperator>(EllipticOperator::extra(sigma_e));
  a_i_ = measured_symbol(*intra_);
  a_e_ = measured_symbol(*extra_);
  h_.resize(a_i_.size());
  for (Index k = 0; k < h_.size(); ++k) h_[k] = k == 0 ? 0.0 : harmonic_mean(a_i_[k], a_e_[k]);
}

FourierOracle FourierOracle::from_operator(const BidomainOperator& op, double theta) {
  if (!op.constant_coefficients()) throw InvalidArgument("Fourier oracle needs constant conductivities");
  return FourierOracle(ConstantCoeffProblem{op.sigma_i().block(0), op.sigma_e().block(0), theta, op.grid()});
}

void FourierOracle::check_grid(const ScalarField& f) const { require_same_grid(problem_.grid, f.grid()); }

double FourierOracle::harmonic_symbol(const std::array<Index, 3>& mode) const {
  return h_[lattice_slot(problem_.grid, mode)];
}

ScalarField FourierOracle::apply(const ScalarField& f) const {
  check_grid(f);
  VectorXcd c = fft_forward(grid(), f.values());
  c.array() *= h_.array();
  return ScalarField(grid(), fft_inverse(grid(), c));
}

ScalarField FourierOracle::resolvent(Complex lambda, const ScalarField& s) const {
  require_off_cut(lambda);
  check_grid(s);
  VectorXcd c = fft_forward(grid(), s.values());
  for (Index k = 0; k < c.size(); ++k) c[k] /= (lambda + h_[k]);
  return ScalarField(grid(), fft_inverse(grid(), c));
}

ScalarField FourierOracle::semigroup(double t, const ScalarField& u0) const {
  if (!(t >= 0.0)) throw InvalidArgument("semigroup time must be nonnegative");
  check_grid(u0);
  VectorXcd c = fft_forward(grid(), u0.values());
  for (Index k = 0; k < c.size(); ++k) c[k] *= std::exp(-t * h_[k]);
  return ScalarField(grid(), fft_inverse(grid(), c));
}

ScalarField FourierOracle::extracellular(const ScalarField& u) const {
  check_grid(u);
  VectorXcd c = fft_forward(grid(), u.values());
  c[0] = 0.0;
  for (Index k = 1; k < c.size(); ++k) c[k] *= -a_i_[k] / (a_i_[k] + a_e_[k]);
  return ScalarField(grid(), fft_inverse(grid(), c));
}

std::vector<ScalarField> FourierOracle::spectral_gradient(const ScalarField& f) const {
  check_grid(f);
  const VectorXcd c = fft_forward(grid(), f.values());
  std::vector<ScalarField> out;
  for (int a = 0; a < grid().dim(); ++a) {
    VectorXcd ca(c.size());
    for (Index k = 0; k < c.size(); ++k) {
      const auto m = lattice_mode(grid(), k);
      const bool nyquist = grid().points(a) % 2 == 0 && m[a] == grid().points(a) / 2;
      const double freq = 2.0 * std::numbers::pi * static_cast<double>(m[a]) / grid().extent(a);
      ca[k] = nyquist ? Complex(0.0) : Complex(0.0, freq) * c[k];
    }
    out.emplace_back(grid(), fft_inverse(grid(), ca));
  }
  return out;
}

std::pair<ScalarField, ScalarField> FourierOracle::dual_solution(double theta, const ScalarField& psi_i,
                                                                 const ScalarField& psi_e) const {
  if (!(std::abs(theta) < std::numbers::pi)) throw ThetaOutOfSector("|theta| must be below pi");
  check_grid(psi_i);
  check_grid(psi_e);
  const double scale = std::max({psi_i.values().cwiseAbs().maxCoeff(), psi_e.values().cwiseAbs().maxCoeff(), 1e-300});
  if (std::abs(mean(psi_i) - mean(psi_e)) > 1e-10 * scale)
    throw IncompatibleMeans("dual problem needs mean(psi_i) = mean(psi_e)");

  const Complex phase = std::polar(1.0, theta);
  const VectorXcd pi_hat = fft_forward(grid(), psi_i.values());
  const VectorXcd pe_hat = fft_forward(grid(), psi_e.values());
  VectorXcd fi(pi_hat.size()), fe(pi_hat.size());
  // Zero mode: e^{i theta}(phi_i + phi_e) = psi, phi_i - phi_e = 0.
  const Complex zero_sum = pi_hat[0] / phase;
  fi[0] = 0.5 * zero_sum;
  fe[0] = 0.5 * zero_sum;
  for (Index k = 1; k < fi.size(); ++k) {
    const double ai = a_i_[k], ae = a_e_[k];
    const Complex denom = ai * ae + phase * (ai + ae);
    fi[k] = ((ae + phase) * pi_hat[k] - phase * pe_hat[k]) / denom;
    fe[k] = ((ai + phase) * pe_hat[k] - phase * pi_hat[k]) / denom;
  }
  return {ScalarField(grid(), fft_inverse(grid(), fi)), ScalarField(grid(), fft_inverse(grid(), fe))};
}

std::pair<double, double> FourierOracle::dual_residuals(double theta, const ScalarField& phi_i,
                                                        const ScalarField& phi_e, const ScalarField& psi_i,
                                                        const ScalarField& psi_e) const {
  const Complex phase = std::polar(1.0, theta);
  const VectorXcd coupling = phase * (phi_i.values() + phi_e.values());
  const VectorXcd ri = coupling + intra_->apply(phi_i).values() - psi_i.values();
  const VectorXcd re = coupling + extra_->apply(phi_e).values() - psi_e.values();
  const VectorXd& w = intra_->weights();
  return {weighted_norm(ri, w, 2.0), weighted_norm(re, w, 2.0)};
}

double FourierOracle::denominator_margin(double theta) const {
  const Complex phase = std::polar(1.0, theta);
  double margin = std::numeric_limits<double>::infinity();
  for (Index k = 1; k < a_i_.size(); ++k) {
    const double ai = a_i_[k], ae = a_e_[k];
    margin = std::min(margin, std::abs(ai * ae + phase * (ai + ae)) / (ai * ae + ai + ae));
  }
  return margin;
}

GridSpec extended_grid(const GridSpec& box, int axis) {
  if (axis < 0 || axis >= box.dim()) throw InvalidArgument("extension axis out of range");
  if (box.boundary(axis) != Boundary::neumann_box) throw InvalidArgument("even extension needs a box axis");
  auto extents = box.extents();
  auto points = box.point_counts();
  auto boundaries = box.boundaries();
  extents[axis] *= 2.0;
  points[axis] = 2 * (points[axis] - 1);
  boundaries[axis] = Boundary::periodic;
  return GridSpec(extents, points, boundaries);
}

ScalarField even_extension(const ScalarField& f, int axis) {
  const GridSpec& box = f.grid();
  const GridSpec ext = extended_grid(box, axis);
  const Index n = box.points(axis);
  VectorXcd values(ext.size());
  for (Index j = 0; j < ext.size(); ++j) {
    auto idx = ext.unflatten(j);
    if (idx[axis] >= n) idx[axis] = 2 * (n - 1) - idx[axis];
    values[j] = f[box.flatten(idx)];
  }
  return ScalarField(ext, std::move(values));
}

ScalarField even_extension(const ScalarField& f) {
  ScalarField out = f;
  for (int a = 0; a < f.grid().dim(); ++a)
    if (f.grid().boundary(a) == Boundary::neumann_box) out = even_extension(out, a);
  return out;
}

ScalarField restrict_to_box(const ScalarField& extended, const GridSpec& box) {
  const GridSpec& ext = extended.grid();
  if (ext.dim() != box.dim()) throw GridMismatch("restriction dimension mismatch");
  for (int a = 0; a < box.dim(); ++a) {
    const bool reflected = box.boundary(a) == Boundary::neumann_box && ext.boundary(a) == Boundary::periodic;
    const Index expect = reflected ? 2 * (box.points(a) - 1) : box.points(a);
    if (ext.points(a) != expect) throw GridMismatch("extended grid does not match the box");
  }
  VectorXcd values(box.size());
  for (Index j = 0; j < box.size(); ++j) values[j] = extended[ext.flatten(box.unflatten(j))];
  return ScalarField(box, std::move(values));
}

}  // namespace bidomain
