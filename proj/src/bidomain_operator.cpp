#include "bidomain/bidomain_operator.hpp"

#include <cmath>
#include <random>
#include <string>

#include "bidomain/detail/gmres.hpp"

namespace bidomain {

namespace {

// Mean part and centered part of s. A centered part at roundoff level (a
// constant source) is dropped so constants resolve exactly.
VectorXcd split_mean(const VectorXcd& s, const VectorXd& w, Complex& m) {
  m = weighted_mean(s, w);
  VectorXcd s1 = (s.array() - m).matrix();
  const double scale = s.size() ? s.cwiseAbs().maxCoeff() : 0.0;
  if (s1.size() && s1.cwiseAbs().maxCoeff() <= 32 * std::numeric_limits<double>::epsilon() * scale) s1.setZero();
  return s1;
}

constexpr std::size_t kMaxCachedFactors = 64;

double relative(double num, double den) { return den > 0.0 ? num / den : num; }

}  // namespace

struct BidomainOperator::BlockFactor {
  Index n = 0;
  double border = 1.0;
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>, Eigen::COLAMDOrdering<int>> lu;
};

void require_off_cut(Complex lambda) {
  if (lambda == Complex(0.0) || (lambda.imag() == 0.0 && lambda.real() <= 0.0))
    throw LambdaOnCut("spectral parameter lies on the cut (-inf, 0]");
  if (!std::isfinite(lambda.real()) || !std::isfinite(lambda.imag()))
    throw InvalidArgument("spectral parameter must be finite");
}

BidomainOperator::BidomainOperator(ConductivityPtr sigma_i, ConductivityPtr sigma_e, LinearSolverOptions options)
    : sigma_i_(std::move(sigma_i)), sigma_e_(std::move(sigma_e)), options_(options) {
  if (!sigma_i_ || !sigma_e_) throw InvalidArgument("bidomain operator needs both conductivities");
  require_same_grid(sigma_i_->grid(), sigma_e_->grid());
  intra_ = std::make_shared<const EllipticOperator>(EllipticOperator::intra(sigma_i_));
  extra_ = std::make_shared<const EllipticOperator>(EllipticOperator::extra(sigma_e_));
  sum_ = std::make_shared<const EllipticOperator>(EllipticOperator::sum(sigma_i_, sigma_e_));
  sum_inverse_ = std::make_unique<MeanZeroSolver>(sum_, options_);
}

ScalarField BidomainOperator::apply(const ScalarField& f) const {
  require_same_grid(grid(), f.grid());
  const ScalarField pf = project_mean_zero(f);
  const ScalarField ae = extra_->apply(pf);
  const VectorXcd g = sum_inverse_->solve_values(ae.values());
  return intra_->apply(ScalarField(grid(), g));
}

ScalarField BidomainOperator::apply_alternative(const ScalarField& f) const {
  require_same_grid(grid(), f.grid());
  const ScalarField pf = project_mean_zero(f);
  const ScalarField ai = intra_->apply(pf);
  const VectorXcd g = sum_inverse_->solve_values(ai.values());
  const ScalarField corr = intra_->apply(ScalarField(grid(), g));
  return ScalarField(grid(), ai.values() - corr.values());
}

bool BidomainOperator::use_block_direct() const {
  using M = LinearSolverOptions::Method;
  if (options_.method == M::iterative) return false;
  if (options_.method == M::direct) return true;
  return grid().size() <= options_.assembly_cap;
}

std::shared_ptr<const BidomainOperator::BlockFactor> BidomainOperator::block_factor(Complex lambda) const {
  const auto key = std::make_pair(lambda.real(), lambda.imag());
  {
    std::lock_guard lock(cache_mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  std::call_once(stiffness_once_, [&] {
    const Index cap = std::max(options_.assembly_cap, grid().size());
    k_i_ = intra_->stiffness(cap);
    k_sum_ = sum_->stiffness(cap);
  });

  auto factor = std::make_shared<BlockFactor>();
  const Index n = grid().size();
  const VectorXd& w = weights();
  factor->n = n;
  factor->border = k_sum_.diagonal().mean() / w.mean();
  std::vector<Eigen::Triplet<Complex>> t;
  t.reserve(2 * k_i_.nonZeros() + k_sum_.nonZeros() + 3 * n);
  for (int col = 0; col < k_i_.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(k_i_, col); it; ++it) {
      t.emplace_back(it.row(), it.col(), it.value());
      t.emplace_back(it.row(), n + it.col(), it.value());
      t.emplace_back(n + it.row(), it.col(), it.value());
    }
  for (int col = 0; col < k_sum_.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(k_sum_, col); it; ++it)
      t.emplace_back(n + it.row(), n + it.col(), it.value());
  for (Index j = 0; j < n; ++j) {
    t.emplace_back(j, j, lambda * w[j]);
    t.emplace_back(n + j, 2 * n, factor->border * w[j]);
    t.emplace_back(2 * n, n + j, factor->border * w[j]);
  }
  Eigen::SparseMatrix<Complex> block(2 * n + 1, 2 * n + 1);
  block.setFromTriplets(t.begin(), t.end());
  block.makeCompressed();
  factor->lu.compute(block);
  if (factor->lu.info() != Eigen::Success)
    throw LinearSolveDivergence("factorization of the resolvent block system failed", {});

  std::lock_guard lock(cache_mutex_);
  if (cache_.size() >= kMaxCachedFactors) cache_.erase(cache_.begin());
  auto [it, inserted] = cache_.emplace(key, std::move(factor));
  return it->second;
}

VectorXcd BidomainOperator::solve_mean_zero_part(Complex lambda, const VectorXcd& s1, VectorXcd& u_e,
                                                 SolveStats& stats) const {
  const Index n = grid().size();
  const VectorXd& w = weights();
  if (s1.isZero(0.0)) {
    u_e = VectorXcd::Zero(n);
    return VectorXcd::Zero(n);
  }
  if (use_block_direct()) {
    const auto factor = block_factor(lambda);
    VectorXcd rhs = VectorXcd::Zero(2 * n + 1);
    rhs.head(n) = (w.array() * s1.array()).matrix();
    const VectorXcd sol = factor->lu.solve(rhs);
    u_e = project_mean_zero(VectorXcd(sol.segment(n, n)), w);
    stats.direct = true;
    stats.iterations = 1;
    return sol.head(n);
  }

  // Matrix-free fallback: GMRES on (lambda + A) u = s1 with an inner
  // mean-zero elliptic solve per operator application.
  auto apply_shifted = [&](const VectorXcd& v) -> VectorXcd {
    const ScalarField av = apply(ScalarField(grid(), v));
    return lambda * v + av.values();
  };
  const Index cap = options_.max_iterations > 0 ? options_.max_iterations : 10 * n;
  std::vector<double> history;
  VectorXcd u = detail::gmres(apply_shifted, s1, 0.1 * options_.tolerance, 60, cap, history);
  u_e = recover_extracellular(ScalarField(grid(), u)).values();
  stats.direct = false;
  stats.iterations = static_cast<Index>(history.size());
  stats.history = std::move(history);
  return u;
}

ResolventSolution BidomainOperator::solve_resolvent(Complex lambda, const ScalarField& s) const {
  require_off_cut(lambda);
  require_same_grid(grid(), s.grid());
  const VectorXd& w = weights();
  Complex m;
  const VectorXcd s1 = split_mean(s.values(), w, m);

  ResolventSolution sol;
  sol.lambda = lambda;
  VectorXcd u_e;
  VectorXcd u = solve_mean_zero_part(lambda, s1, u_e, sol.stats);
  u.array() += m / lambda;
  sol.u = ScalarField(grid(), std::move(u));
  sol.u_e = ScalarField(grid(), std::move(u_e));
  sol.u_i = ScalarField(grid(), sol.u.values() + sol.u_e.values());

  const double snorm = discrete_norm(s, 2.0);
  const VectorXcd ai_ui = intra_->apply(sol.u_i).values();
  const VectorXcd ae_ue = extra_->apply(sol.u_e).values();
  const VectorXcd lu = lambda * sol.u.values();
  sol.residuals.parabolic = relative(weighted_norm(VectorXcd(lu + ai_ui - s.values()), w, 2.0), snorm);
  sol.residuals.elliptic = relative(weighted_norm(VectorXcd(lu - ae_ue - s.values()), w, 2.0), snorm);
  sol.residuals.extracellular_mean = mean_defect(sol.u_e);
  const VectorXcd au = apply(sol.u).values();
  sol.residuals.operator_equation = relative(weighted_norm(VectorXcd(lu + au - s.values()), w, 2.0), snorm);
  sol.stats.relative_residual = sol.residuals.operator_equation;
  return sol;
}

ScalarField BidomainOperator::resolve(Complex lambda, const ScalarField& s) const {
  require_off_cut(lambda);
  require_same_grid(grid(), s.grid());
  const VectorXd& w = weights();
  Complex m;
  const VectorXcd s1 = split_mean(s.values(), w, m);
  VectorXcd u_e;
  SolveStats stats;
  VectorXcd u = solve_mean_zero_part(lambda, s1, u_e, stats);
  u.array() += m / lambda;
  return ScalarField(grid(), std::move(u));
}

ScalarField BidomainOperator::recover_extracellular(const ScalarField& u, const ScalarField* s_i,
                                                    const ScalarField* s_e) const {
  require_same_grid(grid(), u.grid());
  VectorXcd rhs = -intra_->apply(project_mean_zero(u)).values();
  if (s_i || s_e) {
    VectorXcd total = VectorXcd::Zero(grid().size());
    if (s_i) {
      require_same_grid(grid(), s_i->grid());
      total += s_i->values();
    }
    if (s_e) {
      require_same_grid(grid(), s_e->grid());
      total += s_e->values();
    }
    if (mean_defect(ScalarField(grid(), total)) > 1e-10)
      throw CompatibilityViolation("intra- and extracellular source means do not cancel");
    rhs += total;
  }
  // Roundoff means of A_i P u and the admitted source defect are removed.
  return ScalarField(grid(), sum_inverse_->solve_values(project_mean_zero(rhs, weights())));
}

double BidomainOperator::adjoint_defect(int trials, std::uint64_t seed) const {
  if (trials < 1) throw InvalidArgument("adjoint_defect needs at least one trial");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const Index n = grid().size();
  auto draw = [&] {
    VectorXd v(n);
    for (Index j = 0; j < n; ++j) v[j] = normal(rng);
    return ScalarField::from_real(grid(), v);
  };
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const ScalarField f = draw();
    const ScalarField g = draw();
    const Complex lhs = inner_product(apply(f), g);
    const Complex rhs = inner_product(f, apply(g));
    worst = std::max(worst, std::abs(lhs - rhs) / (discrete_norm(f, 2.0) * discrete_norm(g, 2.0)));
  }
  return worst;
}

double BidomainOperator::quadratic_form_minimum(int trials, std::uint64_t seed) const {
  if (trials < 1) throw InvalidArgument("quadratic_form_minimum needs at least one trial");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const Index n = grid().size();
  double lowest = std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    VectorXd v(n);
    for (Index j = 0; j < n; ++j) v[j] = normal(rng);
    const ScalarField f = ScalarField::from_real(grid(), v);
    const double nf = discrete_norm(f, 2.0);
    lowest = std::min(lowest, inner_product(apply(f), f).real() / (nf * nf));
  }
  return lowest;
}

Eigen::MatrixXd BidomainOperator::dense_matrix() const {
  const Index n = grid().size();
  if (n > options_.dense_cap)
    throw TooLargeToAssemble("grid has " + std::to_string(n) + " nodes, dense cap is " +
                             std::to_string(options_.dense_cap));
  Eigen::MatrixXd m(n, n);
  for (Index j = 0; j < n; ++j) {
    VectorXd e = VectorXd::Zero(n);
    e[j] = 1.0;
    m.col(j) = apply(ScalarField::from_real(grid(), e)).values().real();
  }
  return m;
}

Eigen::MatrixXd BidomainOperator::weighted_matrix() const {
  const VectorXd sw = weights().cwiseSqrt();
  return sw.asDiagonal() * dense_matrix() * sw.cwiseInverse().asDiagonal();
}

const SpectralDecomposition& BidomainOperator::spectral_decomposition() const {
  std::call_once(spectral_once_, [&] {
    const Eigen::MatrixXd s = weighted_matrix();
    const double scale = std::max(s.cwiseAbs().maxCoeff(), 1e-300);
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
      throw NonSymmetric("bidomain operator is not self-adjoint in the weighted inner product");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (s + s.transpose()));
    auto out = std::make_unique<SpectralDecomposition>();
    out->eigenvalues = eig.eigenvalues();
    out->eigenvectors = eig.eigenvectors();
    out->sqrt_weights = weights().cwiseSqrt();
    spectral_ = std::move(out);
  });
  return *spectral_;
}

FractionalResult BidomainOperator::fractional_apply(double alpha, double shift, const ScalarField& f,
                                                    PowerSign sign) const {
  require_same_grid(grid(), f.grid());
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("fractional exponent must lie in [0, 1]");
  if (!(shift > 0.0)) throw InvalidArgument("fractional shift must be positive");
  if (alpha == 0.0) return {f, discrete_norm(f, 2.0)};

  const auto& sd = spectral_decomposition();
  const VectorXcd scaled = (sd.sqrt_weights.array() * f.values().array()).matrix();
  const VectorXcd coeffs = sd.eigenvectors.transpose() * scaled;
  const VectorXd lifted = (sd.eigenvalues.array().max(0.0) + shift).matrix();
  const VectorXd up = lifted.array().pow(alpha).matrix();
  const VectorXd factor = sign == PowerSign::positive ? up : up.cwiseInverse();
  const VectorXcd mapped = sd.eigenvectors * (factor.array() * coeffs.array()).matrix();
  VectorXcd values = (mapped.array() / sd.sqrt_weights.array()).matrix();
  const double z_norm = (up.array() * coeffs.array()).matrix().norm();
  return {ScalarField(grid(), std::move(values)), z_norm};
}

}  // namespace bidomain
