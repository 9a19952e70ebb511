#include "bidomain/elliptic.hpp"

#include <cmath>
#include <string>

#include <unsupported/Eigen/SparseExtra>

namespace bidomain {

EllipticOperator::EllipticOperator(OperatorKind kind, std::vector<ConductivityPtr> conductivities)
    : kind_(kind), sigmas_(std::move(conductivities)) {
  if (sigmas_.empty()) throw InvalidArgument("elliptic operator needs at least one conductivity");
  if (kind_ == OperatorKind::bidomain) throw InvalidArgument("use BidomainOperator for the bidomain kind");
  grid_ = sigmas_.front()->grid();
  for (const auto& s : sigmas_) require_same_grid(grid_, s->grid());
  weights_ = grid_.node_weights();

  effective_.assign(grid_.size(), Tensor::Zero());
  for (const auto& s : sigmas_)
    for (Index j = 0; j < grid_.size(); ++j) effective_[j] += s->at(j);

  const int d = grid_.dim();
  std::array<Index, 3> range{1, 1, 1};
  for (int a = 0; a < d; ++a)
    range[a] = grid_.boundary(a) == Boundary::periodic ? grid_.points(a) : grid_.points(a) - 1;
  cells_.reserve(range[0] * range[1] * range[2]);
  for (Index i0 = 0; i0 < range[0]; ++i0)
    for (Index i1 = 0; i1 < range[1]; ++i1)
      for (Index i2 = 0; i2 < range[2]; ++i2) {
        const Index base = grid_.flatten({i0, i1, i2});
        std::array<Index, 8> corners{};
        corners.fill(-1);
        for (int c = 0; c < (1 << d); ++c) {
          Index node = base;
          for (int a = 0; a < d; ++a)
            if (c & (1 << a)) node = grid_.neighbor(node, a, 1);
          corners[c] = node;
        }
        cells_.push_back(corners);
      }
}

EllipticOperator EllipticOperator::intra(ConductivityPtr sigma_i) {
  return EllipticOperator(OperatorKind::elliptic_i, {std::move(sigma_i)});
}

EllipticOperator EllipticOperator::extra(ConductivityPtr sigma_e) {
  return EllipticOperator(OperatorKind::elliptic_e, {std::move(sigma_e)});
}

EllipticOperator EllipticOperator::sum(ConductivityPtr sigma_i, ConductivityPtr sigma_e) {
  return EllipticOperator(OperatorKind::elliptic_sum, {std::move(sigma_i), std::move(sigma_e)});
}

bool EllipticOperator::constant_coefficients() const {
  for (const auto& s : sigmas_)
    if (!s->is_constant()) return false;
  return true;
}

template <typename Vec>
Vec EllipticOperator::apply_stiffness_impl(const Vec& v) const {
  using Scalar = typename Vec::Scalar;
  const int d = grid_.dim();
  const int ncorner = 1 << d;
  const double share = grid_.cell_volume() / ncorner;
  std::array<double, 3> inv_h{};
  for (int a = 0; a < d; ++a) inv_h[a] = 1.0 / grid_.spacing(a);

  Vec out = Vec::Zero(v.size());
  for (const auto& cell : cells_) {
    for (int c = 0; c < ncorner; ++c) {
      std::array<Scalar, 3> g{};
      for (int a = 0; a < d; ++a) {
        const int bit = 1 << a;
        g[a] = (v[cell[c | bit]] - v[cell[c & ~bit]]) * inv_h[a];
      }
      const Tensor& s = effective_[cell[c]];
      for (int a = 0; a < d; ++a) {
        Scalar flux(0);
        for (int b = 0; b < d; ++b) flux += s(a, b) * g[b];
        flux *= share * inv_h[a];
        const int bit = 1 << a;
        out[cell[c | bit]] += flux;
        out[cell[c & ~bit]] -= flux;
      }
    }
  }
  return out;
}

VectorXcd EllipticOperator::apply_stiffness(const VectorXcd& v) const {
  if (v.size() != grid_.size()) throw GridMismatch("vector length does not match the operator grid");
  return apply_stiffness_impl(v);
}

VectorXd EllipticOperator::apply_stiffness(const VectorXd& v) const {
  if (v.size() != grid_.size()) throw GridMismatch("vector length does not match the operator grid");
  return apply_stiffness_impl(v);
}

ScalarField EllipticOperator::apply(const ScalarField& f) const {
  require_same_grid(grid_, f.grid());
  VectorXcd out = apply_stiffness_impl(f.values());
  out.array() /= weights_.array();
  return ScalarField(grid_, std::move(out));
}

SparseMatrix EllipticOperator::stiffness(Index cap) const {
  if (grid_.size() > cap)
    throw TooLargeToAssemble("grid has " + std::to_string(grid_.size()) + " nodes, assembly cap is " +
                             std::to_string(cap));
  const int d = grid_.dim();
  const int ncorner = 1 << d;
  const double share = grid_.cell_volume() / ncorner;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(cells_.size() * ncorner * d * d * 4);
  for (const auto& cell : cells_) {
    for (int c = 0; c < ncorner; ++c) {
      const Tensor& s = effective_[cell[c]];
      for (int a = 0; a < d; ++a) {
        const Index a_hi = cell[c | (1 << a)], a_lo = cell[c & ~(1 << a)];
        for (int b = 0; b < d; ++b) {
          const Index b_hi = cell[c | (1 << b)], b_lo = cell[c & ~(1 << b)];
          const double k = share * s(a, b) / (grid_.spacing(a) * grid_.spacing(b));
          if (k == 0.0) continue;
          triplets.emplace_back(a_hi, b_hi, k);
          triplets.emplace_back(a_hi, b_lo, -k);
          triplets.emplace_back(a_lo, b_hi, -k);
          triplets.emplace_back(a_lo, b_lo, k);
        }
      }
    }
  }
  SparseMatrix k(grid_.size(), grid_.size());
  k.setFromTriplets(triplets.begin(), triplets.end());
  k.prune(0.0);
  return k;
}

SparseMatrix EllipticOperator::assemble(Index cap) const {
  SparseMatrix k = stiffness(cap);
  const VectorXd inv_w = weights_.cwiseInverse();
  return inv_w.asDiagonal() * k;
}

VectorXd EllipticOperator::stiffness_diagonal() const {
  const int d = grid_.dim();
  const int ncorner = 1 << d;
  const double share = grid_.cell_volume() / ncorner;
  VectorXd diag = VectorXd::Zero(grid_.size());
  for (const auto& cell : cells_)
    for (int c = 0; c < ncorner; ++c) {
      const Tensor& s = effective_[cell[c]];
      for (int a = 0; a < d; ++a) {
        const double h = grid_.spacing(a);
        const double k = share * s(a, a) / (h * h);
        diag[cell[c | (1 << a)]] += k;
        diag[cell[c & ~(1 << a)]] += k;
      }
    }
  return diag;
}

void write_matrix_market(const std::string& path, const SparseMatrix& m) {
  if (!Eigen::saveMarket(m, path)) throw InvalidArgument("cannot write Matrix Market file " + path);
}

MeanZeroSolver::MeanZeroSolver(std::shared_ptr<const EllipticOperator> op, LinearSolverOptions options)
    : op_(std::move(op)), options_(options) {
  if (!op_) throw InvalidArgument("MeanZeroSolver needs an operator");
  if (!(options_.tolerance > 0.0)) throw InvalidArgument("linear tolerance must be positive");
}

bool MeanZeroSolver::uses_direct() const {
  using M = LinearSolverOptions::Method;
  if (options_.method == M::iterative) return false;
  if (options_.method == M::direct) return true;
  return op_->grid().size() <= options_.assembly_cap;
}

ScalarField MeanZeroSolver::solve(const ScalarField& f, SolveStats* stats) const {
  require_same_grid(op_->grid(), f.grid());
  if (mean_defect(f) > 1e-10) throw NotMeanZero("right-hand side of the mean-zero solve has nonzero mean");
  return ScalarField(f.grid(), solve_values(f.values(), stats));
}

VectorXcd MeanZeroSolver::solve_values(const VectorXcd& f, SolveStats* stats) const {
  const VectorXd& w = op_->weights();
  const VectorXcd rhs = project_mean_zero(f, w);
  if (!uses_direct()) return solve_cg(rhs, stats);

  VectorXcd u = solve_direct(rhs);
  if (stats) {
    VectorXcd r = op_->apply_stiffness(u);
    r.array() /= w.array();
    r -= rhs;
    const double denom = weighted_norm(rhs, w, 2.0);
    stats->direct = true;
    stats->iterations = 1;
    stats->relative_residual = denom > 0.0 ? weighted_norm(r, w, 2.0) / denom : 0.0;
    stats->history = {stats->relative_residual};
  }
  return u;
}

VectorXcd MeanZeroSolver::solve_direct(const VectorXcd& f) const {
  const Index n = op_->grid().size();
  std::call_once(factor_once_, [&] {
    const SparseMatrix k = op_->stiffness(std::max(options_.assembly_cap, n));
    const VectorXd& w = op_->weights();
    border_scale_ = k.diagonal().mean() / w.mean();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(k.nonZeros() + 2 * n);
    for (int col = 0; col < k.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(k, col); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    for (Index j = 0; j < n; ++j) {
      t.emplace_back(j, n, border_scale_ * w[j]);
      t.emplace_back(n, j, border_scale_ * w[j]);
    }
    SparseMatrix bordered(n + 1, n + 1);
    bordered.setFromTriplets(t.begin(), t.end());
    bordered.makeCompressed();
    lu_ = std::make_unique<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>>();
    lu_->compute(bordered);
    if (lu_->info() != Eigen::Success) throw LinearSolveDivergence("factorization of the bordered stiffness failed", {});
  });

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 1, 2);
  const VectorXd& w = op_->weights();
  rhs.col(0).head(n) = (w.array() * f.real().array()).matrix();
  rhs.col(1).head(n) = (w.array() * f.imag().array()).matrix();
  const Eigen::MatrixXd sol = lu_->solve(rhs);
  VectorXcd u(n);
  for (Index j = 0; j < n; ++j) u[j] = Complex(sol(j, 0), sol(j, 1));
  return project_mean_zero(u, w);
}

VectorXcd MeanZeroSolver::solve_cg(const VectorXcd& f, SolveStats* stats) const {
  const VectorXd& w = op_->weights();
  const Index n = f.size();
  const Index cap = options_.max_iterations > 0 ? options_.max_iterations : 10 * n;
  const double fnorm = weighted_norm(f, w, 2.0);
  VectorXcd x = VectorXcd::Zero(n);
  std::vector<double> history;
  if (fnorm == 0.0) {
    if (stats) *stats = SolveStats{0, 0.0, {0.0}, false};
    return x;
  }
  const VectorXd inv_diag = op_->stiffness_diagonal().cwiseInverse();
  const VectorXd inv_w = w.cwiseInverse();

  auto residual_norm = [&](const VectorXcd& r) {
    double acc = 0.0;
    for (Index j = 0; j < n; ++j) acc += std::norm(r[j]) * inv_w[j];
    return std::sqrt(acc) / fnorm;
  };

  VectorXcd r = (w.array() * f.array()).matrix();
  VectorXcd z = (inv_diag.array() * r.array()).matrix();
  VectorXcd p = z;
  Complex rz = r.dot(z);
  for (Index it = 1; it <= cap; ++it) {
    const VectorXcd q = op_->apply_stiffness(p);
    const Complex pq = p.dot(q);
    if (std::abs(pq) == 0.0) break;
    const Complex alpha = rz / pq;
    x += alpha * p;
    x = project_mean_zero(x, w);
    r -= alpha * q;
    r.array() -= r.mean();  // stay in the range of K
    const double res = residual_norm(r);
    history.push_back(res);
    if (res <= options_.tolerance) {
      if (stats) *stats = SolveStats{it, res, std::move(history), false};
      return x;
    }
    z = (inv_diag.array() * r.array()).matrix();
    const Complex rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  throw LinearSolveDivergence("mean-zero conjugate gradient hit its iteration cap", std::move(history));
}

ScalarField solve_sum_inverse(const MeanZeroSolver& solver, const ScalarField& f, SolveStats* stats) {
  return solver.solve(f, stats);
}

}  // namespace bidomain
