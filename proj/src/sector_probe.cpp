#include "bidomain/sector_probe.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>
#include <thread>

#include <Eigen/SVD>

namespace bidomain {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kAngleSlack = 1e-12;

double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += std::log(x[k]);
    my += std::log(y[k]);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

double magnitude_norm(const std::vector<ScalarField>& components, const VectorXd& weights, double p) {
  return weighted_norm(pointwise_magnitude(components), weights, p);
}

struct Sample {
  Complex lambda;
  int source_id;
};

}  // namespace

void SectorSpec::validate() const {
  if (!(epsilon > 0.0 && epsilon < 0.5 * kPi)) throw InvalidArgument("sector epsilon must lie in (0, pi/2)");
  if (!(min_modulus >= 0.0)) throw InvalidArgument("sector M must be nonnegative");
  if (moduli.empty()) throw InvalidArgument("sector sweep needs at least one modulus");
  if (angles.empty()) throw InvalidArgument("sector sweep needs at least one angle");
  if (p_list.empty()) throw InvalidArgument("sector sweep needs at least one p");
  if (slope_decades < 1) throw InvalidArgument("slope window must span at least one decade");
  for (double r : moduli) {
    if (r == 0.0) throw LambdaOnCut("lambda = 0 requested");
    if (!(r > 0.0)) throw LambdaOnCut("negative modulus puts lambda on the cut");
    if (!(r > min_modulus)) throw InvalidArgument("modulus below the sector radius M");
  }
  for (double theta : angles) {
    if (!std::isfinite(theta)) throw InvalidArgument("angle must be finite");
    if (std::abs(theta) >= kPi) throw LambdaOnCut("angle on the negative real axis");
    if (std::abs(theta) > kPi - epsilon + kAngleSlack) throw InvalidArgument("angle outside the sector");
  }
  for (double p : p_list)
    if (!(p > 1.0)) throw InvalidArgument("p must exceed 1");
}

std::vector<Complex> SectorSpec::samples() const {
  std::vector<Complex> out;
  for (double r : moduli)
    for (double theta : angles) out.push_back(std::polar(r, theta));
  return out;
}

std::vector<double> SectorSpec::geometric_ladder(double lo_exp, double hi_exp, int per_decade) {
  if (per_decade < 1 || hi_exp < lo_exp) throw InvalidArgument("bad geometric ladder");
  const int steps = static_cast<int>(std::lround((hi_exp - lo_exp) * per_decade));
  std::vector<double> out;
  for (int k = 0; k <= steps; ++k) out.push_back(std::pow(10.0, lo_exp + static_cast<double>(k) / per_decade));
  return out;
}

double n_functional(const ResolventSolution& sol) {
  const double mod = std::abs(sol.lambda);
  const VectorXd gu = pointwise_magnitude(discrete_gradient(sol.u));
  const VectorXd gi = pointwise_magnitude(discrete_gradient(sol.u_i));
  const VectorXd ge = pointwise_magnitude(discrete_gradient(sol.u_e));
  const VectorXd pointwise = mod * sol.u.values().cwiseAbs() + std::sqrt(mod) * (gu + gi + ge);
  return pointwise.size() ? pointwise.maxCoeff() : 0.0;
}

std::vector<ScalarField> random_sources(const GridSpec& grid, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::vector<ScalarField> out;
  for (int c = 0; c < count; ++c) {
    VectorXd v(grid.size());
    for (Index j = 0; j < v.size(); ++j) v[j] = uniform(rng);
    v /= v.cwiseAbs().maxCoeff();
    out.push_back(ScalarField::from_real(grid, v));
  }
  return out;
}

ResolventNormEstimate resolvent_norm(const BidomainOperator& op, Complex lambda, double p, int probes,
                                     std::uint64_t seed, bool allow_dense) {
  require_off_cut(lambda);
  if (!(p > 1.0)) throw InvalidArgument("p must exceed 1");
  const GridSpec& grid = op.grid();
  const VectorXd& w = op.weights();
  const Index n = grid.size();

  const bool dense = allow_dense && (p == 2.0 || p == kInfNorm) && n <= op.options().dense_cap;
  if (dense) {
    const Eigen::MatrixXcd shifted =
        op.dense_matrix().cast<Complex>() + lambda * Eigen::MatrixXcd::Identity(n, n);
    const Eigen::MatrixXcd r = shifted.partialPivLu().inverse();
    if (p == kInfNorm) return {r.cwiseAbs().rowwise().sum().maxCoeff(), true};
    const VectorXd sw = w.cwiseSqrt();
    const Eigen::MatrixXcd rw = sw.asDiagonal() * r * sw.cwiseInverse().asDiagonal();
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(rw);
    return {svd.singularValues()[0], true};
  }

  auto resolve = [&](const VectorXcd& x) { return op.resolve(lambda, ScalarField(grid, x)).values(); };
  // R^T = W R W^{-1}, so row j of R is W R (W^{-1} e_j).
  auto row = [&](Index j) {
    VectorXcd e = VectorXcd::Zero(n);
    e[j] = 1.0 / w[j];
    return VectorXcd(w.cast<Complex>().asDiagonal() * resolve(e));
  };

  double best = 0.0;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> coin(0, 1);
  std::vector<VectorXcd> candidates;
  for (int k = 0; k < probes; ++k) {
    VectorXcd x(n);
    for (Index j = 0; j < n; ++j) x[j] = coin(rng) ? 1.0 : -1.0;
    candidates.push_back(x);
  }

  for (VectorXcd x : candidates) {
    if (p == kInfNorm) {
      // Hager-style ascent on a maximal row.
      double last = 0.0;
      for (int it = 0; it < 5; ++it) {
        const VectorXcd y = resolve(x);
        Index j = 0;
        y.cwiseAbs().maxCoeff(&j);
        const VectorXcd r = row(j);
        const double rowsum = r.cwiseAbs().sum();
        best = std::max(best, rowsum);
        if (rowsum <= last) break;
        last = rowsum;
        for (Index k = 0; k < n; ++k) x[k] = std::abs(r[k]) > 0 ? std::conj(r[k]) / std::abs(r[k]) : Complex(1.0);
      }
    } else {
      // Power iteration on R*R in the weighted inner product; R* = R(conj lambda).
      const double p_norm = weighted_norm(x, w, p);
      best = std::max(best, weighted_norm(resolve(x), w, p) / p_norm);
      for (int it = 0; it < 20; ++it) {
        const VectorXcd y = resolve(x);
        best = std::max(best, weighted_norm(y, w, p) / weighted_norm(x, w, p));
        VectorXcd z = op.resolve(std::conj(lambda), ScalarField(grid, y)).values();
        const double zn = weighted_norm(z, w, 2.0);
        if (zn == 0.0) break;
        x = z / zn;
      }
    }
  }
  return {best, false};
}

double pseudo_resolvent_defect(const BidomainOperator& op, Complex lambda, Complex mu, int trials,
                               std::uint64_t seed) {
  require_off_cut(lambda);
  require_off_cut(mu);
  if (trials < 1) throw InvalidArgument("need at least one trial");
  const GridSpec& grid = op.grid();
  const VectorXd& w = op.weights();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    VectorXcd s(grid.size());
    for (Index j = 0; j < s.size(); ++j) s[j] = Complex(normal(rng), normal(rng));
    const ScalarField src(grid, s);
    const VectorXcd rl = op.resolve(lambda, src).values();
    const VectorXcd rm = op.resolve(mu, src).values();
    const VectorXcd rlrm = op.resolve(lambda, ScalarField(grid, rm)).values();
    const VectorXcd defect = rl - rm - (mu - lambda) * rlrm;
    const double scale = std::max(weighted_norm(rl, w, 2.0), weighted_norm(rm, w, 2.0));
    if (scale > 0) worst = std::max(worst, weighted_norm(defect, w, 2.0) / scale);
  }
  return worst;
}

SweepSummary summarize(const SectorSpec& spec, const std::vector<SweepRow>& rows, std::size_t failures) {
  SweepSummary sum;
  sum.epsilon = spec.epsilon;
  sum.failures = failures;
  if (rows.empty()) return sum;

  double top = 0.0;
  for (const auto& r : rows) top = std::max(top, std::abs(r.lambda));
  sum.window_floor = top * std::pow(10.0, -spec.slope_decades) * (1 - 1e-9);

  std::vector<double> mods;
  for (double m : spec.moduli)
    if (m >= sum.window_floor) mods.push_back(m);
  std::sort(mods.begin(), mods.end());

  // Max of a row quantity at each modulus in the window.
  auto envelope = [&](double p, auto field) {
    std::vector<double> x, y;
    for (double m : mods) {
      double best = 0.0;
      bool any = false;
      for (const auto& r : rows) {
        if (std::abs(std::abs(r.lambda) - m) > 1e-9 * m) continue;
        if (p > 0 && r.p != p) continue;
        best = std::max(best, field(r));
        any = true;
      }
      if (any && best > 0) {
        x.push_back(m);
        y.push_back(best);
      }
    }
    return log_slope(x, y);
  };

  const double tol = spec.flatness_tolerance;
  bool flat = failures == 0;
  for (const auto& r : rows) {
    sum.max_n_value = std::max(sum.max_n_value, r.n_value);
    sum.max_residual = std::max(sum.max_residual, r.residual);
  }
  sum.n_slope = envelope(-1.0, [](const SweepRow& r) { return r.n_value; });
  flat = flat && sum.n_slope <= tol;
  for (double p : spec.p_list) {
    PSummary ps;
    ps.p = p;
    for (const auto& r : rows)
      if (r.p == p) ps.max_norm_ratio = std::max(ps.max_norm_ratio, r.norm_ratio);
    ps.norm_slope = envelope(p, [](const SweepRow& r) { return r.norm_ratio; });
    ps.grad_slope = envelope(p, [](const SweepRow& r) { return r.grad_ratio; });
    ps.hess_slope = envelope(p, [](const SweepRow& r) { return r.hess_ratio; });
    flat = flat && ps.norm_slope <= tol && ps.grad_slope <= tol && ps.hess_slope <= tol;
    sum.per_p.push_back(ps);
  }
  sum.flat = flat;
  return sum;
}

SectorSweepReport sweep_sector(const BidomainOperator& op, const SectorSpec& spec,
                               const std::vector<ScalarField>& sources, int threads) {
  spec.validate();
  if (sources.empty()) throw InvalidArgument("sector sweep needs at least one source");
  for (const auto& s : sources) require_same_grid(op.grid(), s.grid());

  std::vector<Sample> samples;
  for (Complex lambda : spec.samples())
    for (int k = 0; k < static_cast<int>(sources.size()); ++k) samples.push_back({lambda, k});

  const VectorXd& w = op.weights();
  std::vector<std::vector<SweepRow>> rows(samples.size());
  std::vector<std::string> errors(samples.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t k = next++; k < samples.size(); k = next++) {
      const auto [lambda, id] = samples[k];
      const ScalarField& s = sources[id];
      try {
        const ResolventSolution sol = op.solve_resolvent(lambda, s);
        const double mod = std::abs(lambda);
        const auto grad = discrete_gradient(sol.u);
        const auto hess = second_differences(sol.u);
        const auto& res = sol.residuals;
        const double residual = std::max({res.parabolic, res.elliptic, res.operator_equation, res.extracellular_mean});
        const double n_value = n_functional(sol) / discrete_norm(s, kInfNorm);
        for (double p : spec.p_list) {
          const double sn = weighted_norm(s.values(), w, p);
          SweepRow row;
          row.lambda = lambda;
          row.p = p;
          row.source_id = id;
          row.norm_ratio = mod * weighted_norm(sol.u.values(), w, p) / sn;
          row.grad_ratio = std::sqrt(mod) * magnitude_norm(grad, w, p) / sn;
          row.hess_ratio = magnitude_norm(hess, w, p) / sn;
          row.n_value = n_value;
          row.residual = residual;
          rows[k].push_back(row);
        }
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };

  const int count = std::max(1, threads);
  std::vector<std::thread> pool;
  for (int t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  SectorSweepReport report;
  report.spec = spec;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (!errors[k].empty()) report.failures.push_back({samples[k].lambda, samples[k].source_id, errors[k]});
    for (auto& r : rows[k]) report.rows.push_back(r);
  }
  auto key = [](const SweepRow& r) {
    return std::make_tuple(std::abs(r.lambda), std::arg(r.lambda), r.p, r.source_id);
  };
  std::sort(report.rows.begin(), report.rows.end(), [&](const SweepRow& a, const SweepRow& b) { return key(a) < key(b); });
  report.summary = summarize(spec, report.rows, report.failures.size());
  return report;
}

std::vector<double> epsilon_trend(const BidomainOperator& op, SectorSpec spec, const std::vector<double>& epsilons,
                                  const std::vector<ScalarField>& sources, double p, int threads) {
  std::vector<double> out;
  spec.p_list = {p};
  for (double eps : epsilons) {
    spec.epsilon = eps;
    // Both sector edges and the positive axis.
    spec.angles = {-(kPi - eps), 0.0, kPi - eps};
    const auto report = sweep_sector(op, spec, sources, threads);
    out.push_back(report.summary.per_p.front().max_norm_ratio);
  }
  return out;
}

void write_sweep_csv(std::ostream& out, const SectorSweepReport& report) {
  out << "lambda_re,lambda_im,p,source_id,norm_ratio,grad_ratio,hess_ratio,n_value,residual\n";
  out << std::setprecision(17);
  for (const auto& r : report.rows) {
    out << r.lambda.real() << ',' << r.lambda.imag() << ',';
    if (r.p == kInfNorm)
      out << "inf";
    else
      out << r.p;
    out << ',' << r.source_id << ',' << r.norm_ratio << ',' << r.grad_ratio << ',' << r.hess_ratio << ','
        << r.n_value << ',' << r.residual << '\n';
  }
}

}  // namespace bidomain
