#include "bidomain/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace bidomain {

namespace {

constexpr double kCompatibilityTol = 1e-10;

double sup_real(const ScalarField& f) { return f.size() ? f.values().cwiseAbs().maxCoeff() : 0.0; }

double sup_all(const std::vector<ScalarField>& fields) {
  double out = 0.0;
  for (const auto& f : fields) out = std::max(out, sup_real(f));
  return out;
}

// Pointwise f(u, w) and g(u, w) over the grid.
struct Reaction {
  VectorXcd f;
  std::vector<VectorXcd> g;
};

Reaction evaluate(const IonicModel& model, const ScalarField& u, const std::vector<ScalarField>& w) {
  const Index n = u.size();
  Reaction r{VectorXcd(n), std::vector<VectorXcd>(model.m, VectorXcd(n))};
  std::vector<double> wl(model.m), gl(model.m);
  for (Index j = 0; j < n; ++j) {
    for (int k = 0; k < model.m; ++k) wl[k] = w[k][j].real();
    const double uj = u[j].real();
    r.f[j] = model.f(uj, wl);
    model.g(uj, wl, gl);
    for (int k = 0; k < model.m; ++k) r.g[k][j] = gl[k];
  }
  return r;
}

}  // namespace

void IonicModel::validate() const {
  if (m < 1) throw InvalidArgument("ionic model needs at least one gating variable");
  if (!f || !g) throw InvalidArgument("ionic model is missing f or g");
  if (!(trust_region > 0.0)) throw InvalidArgument("trust region must be positive");
}

IonicModel fitzhugh_nagumo(const FhnParameters& p, double trust_region) {
  if (p.alpha < 0 || p.beta < 0 || p.gamma < 0) throw InvalidArgument("FitzHugh-Nagumo needs alpha, beta, gamma >= 0");
  IonicModel model;
  model.name = "fitzhugh_nagumo";
  model.m = 1;
  model.trust_region = trust_region;
  model.f = [p](double u, std::span<const double> w) { return p.c * u * (u - p.a) * (u - 1.0) + p.alpha * w[0]; };
  model.g = [p](double u, std::span<const double> w, std::span<double> out) { out[0] = -p.beta * u + p.gamma * w[0]; };
  return model;
}

IonicModel passive_model(int m) {
  IonicModel model;
  model.name = "passive";
  model.m = m;
  model.f = [](double, std::span<const double>) { return 0.0; };
  model.g = [](double, std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
  model.trust_region = std::numeric_limits<double>::max();
  return model;
}

TimeSeriesField::TimeSeriesField(std::vector<double> times, std::vector<ScalarField> values)
    : times_(std::move(times)), values_(std::move(values)) {
  if (times_.size() != values_.size()) throw InvalidArgument("time series needs one field per sample time");
  for (std::size_t k = 1; k < times_.size(); ++k) {
    if (!(times_[k] > times_[k - 1])) throw InvalidArgument("time series sample times must increase");
    require_same_grid(values_[0].grid(), values_[k].grid());
  }
}

TimeSeriesField TimeSeriesField::constant(ScalarField value) { return TimeSeriesField({0.0}, {std::move(value)}); }

ScalarField TimeSeriesField::at(double t, const GridSpec& grid) const {
  if (times_.empty()) return ScalarField(grid);
  require_same_grid(grid, values_.front().grid());
  if (t <= times_.front()) return values_.front();
  if (t >= times_.back()) return values_.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
  const std::size_t lo = hi - 1;
  const double theta = (t - times_[lo]) / (times_[hi] - times_[lo]);
  return ScalarField(grid, (1.0 - theta) * values_[lo].values() + theta * values_[hi].values());
}

ModifiedSource::ModifiedSource(std::shared_ptr<const BidomainOperator> op, TimeSeriesField s_i, TimeSeriesField s_e)
    : op_(std::move(op)), s_i_(std::move(s_i)), s_e_(std::move(s_e)) {
  std::set<double> times(s_i_.times().begin(), s_i_.times().end());
  times.insert(s_e_.times().begin(), s_e_.times().end());
  for (double t : times)
    if (compatibility_defect(t) > kCompatibilityTol)
      throw CompatibilityViolation("source means do not cancel at t = " + std::to_string(t));
}

double ModifiedSource::compatibility_defect(double t) const {
  return mean_defect(ScalarField(op_->grid(), intra(t).values() + extra(t).values()));
}

ScalarField ModifiedSource::operator()(double t) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(t); it != cache_.end()) return it->second;
  }
  const GridSpec& grid = op_->grid();
  ScalarField out(grid);
  if (!empty()) {
    const ScalarField si = intra(t);
    const ScalarField total(grid, si.values() + extra(t).values());
    if (mean_defect(total) > kCompatibilityTol)
      throw CompatibilityViolation("source means do not cancel at t = " + std::to_string(t));
    const ScalarField g = op_->sum_inverse().solve(project_mean_zero(total));
    out = ScalarField(grid, si.values() - op_->intra().apply(g).values());
  }
  std::lock_guard lock(mutex_);
  if (cache_.size() > 4096) cache_.clear();
  return cache_.emplace(t, std::move(out)).first->second;
}

std::shared_ptr<ModifiedSource> make_source(std::shared_ptr<const BidomainOperator> op, TimeSeriesField s_i,
                                            TimeSeriesField s_e) {
  return std::make_shared<ModifiedSource>(std::move(op), std::move(s_i), std::move(s_e));
}

Trajectory simulate_bidomain(const SimulationConfig& config) {
  if (!config.op) throw InvalidArgument("simulation needs an operator");
  const BidomainOperator& op = *config.op;
  const GridSpec& grid = op.grid();
  const IonicModel& model = config.model;
  model.validate();
  if (!(config.dt > 0.0) || !(config.t_end > 0.0)) throw InvalidArgument("dt and T must be positive");
  if (config.stride < 1) throw InvalidArgument("stride must be at least 1");
  require_same_grid(grid, config.u0.grid());
  if (!config.w0.empty() && static_cast<int>(config.w0.size()) != model.m)
    throw InvalidArgument("initial gating data must have m fields");

  const auto source = make_source(config.op, config.s_i, config.s_e);
  const VectorXd& weights = op.weights();

  ScalarField u(grid, config.u0.values().real().cast<Complex>());
  std::vector<ScalarField> w;
  for (int k = 0; k < model.m; ++k) {
    w.push_back(config.w0.empty() ? ScalarField(grid) : config.w0[k]);
    require_same_grid(grid, w.back().grid());
  }

  const auto steps = static_cast<long>(std::ceil(config.t_end / config.dt - 1e-9));
  const double h = config.t_end / static_cast<double>(steps);
  const double lambda = 1.0 / h;
  const double trust = model.trust_region;

  Trajectory traj;
  traj.activation_times = VectorXd::Constant(grid.size(), std::numeric_limits<double>::quiet_NaN());

  auto recover = [&](const ScalarField& uu, double t, StepDiagnostics& d) {
    if (source->empty()) {
      d.compatibility_defect = 0.0;
      ScalarField ue = op.recover_extracellular(uu);
      const VectorXcd rhs = -op.intra().apply(project_mean_zero(uu)).values();
      const VectorXcd res = op.sum().apply(ue).values() - rhs;
      const double scale = weighted_norm(rhs, weights, 2.0);
      d.elliptic_residual = scale > 0 ? weighted_norm(res, weights, 2.0) / scale : weighted_norm(res, weights, 2.0);
      return ue;
    }
    const ScalarField si = source->intra(t), se = source->extra(t);
    d.compatibility_defect = source->compatibility_defect(t);
    ScalarField ue = op.recover_extracellular(uu, &si, &se);
    const VectorXcd rhs = si.values() + se.values() - op.intra().apply(project_mean_zero(uu)).values();
    const VectorXcd res = op.sum().apply(ue).values() - project_mean_zero(rhs, weights);
    const double scale = weighted_norm(rhs, weights, 2.0);
    d.elliptic_residual = scale > 0 ? weighted_norm(res, weights, 2.0) / scale : weighted_norm(res, weights, 2.0);
    return ue;
  };

  auto emit = [&](double t, const ScalarField& uu, const ScalarField& ue, const StepDiagnostics& d, bool fields) {
    traj.times.push_back(t);
    traj.series.push_back(d);
    if (fields) traj.states.push_back({t, uu, w, ue, d});
  };

  StepDiagnostics d0;
  d0.u_sup = sup_real(u);
  d0.w_sup = sup_all(w);
  if (!(d0.u_sup <= trust) || !(d0.w_sup <= trust))
    throw TrustRegionExceeded("initial data outside the trust region", 0.0, 0.0, traj);
  ScalarField u_e = recover(u, 0.0, d0);
  d0.extracellular_mean = mean_defect(u_e);
  emit(0.0, u, u_e, d0, true);

  double t = 0.0;
  for (long n = 1; n <= steps; ++n) {
    const Reaction react = evaluate(model, u, w);
    const ScalarField s_now = source->empty() ? ScalarField(grid) : (*source)(t);
    const VectorXcd rhs = lambda * u.values() + s_now.values() - react.f;
    ScalarField u_new = op.resolve(lambda, ScalarField(grid, rhs));
    u_new.values() = u_new.values().real().cast<Complex>();
    std::vector<ScalarField> w_new;
    for (int k = 0; k < model.m; ++k) w_new.emplace_back(grid, w[k].values() - h * react.g[k]);
    const double t_new = n == steps ? config.t_end : static_cast<double>(n) * h;

    StepDiagnostics d;
    d.u_sup = sup_real(u_new);
    d.w_sup = sup_all(w_new);
    if (!(d.u_sup <= trust) || !(d.w_sup <= trust)) {
      const std::string msg = "trust region " + std::to_string(trust) + " left at t = " + std::to_string(t_new);
      throw TrustRegionExceeded(msg, t_new, t, std::move(traj));
    }

    // Upward threshold crossings, interpolated in time.
    const double thr = config.activation_threshold;
    for (Index j = 0; j < grid.size(); ++j) {
      const double a = u[j].real(), b = u_new[j].real();
      if (std::isnan(traj.activation_times[j]) && a < thr && b >= thr)
        traj.activation_times[j] = t + h * (thr - a) / (b - a);
    }

    // Discrete evolution equation, all terms at the new time.
    const Reaction react_new = evaluate(model, u_new, w_new);
    const ScalarField s_new = source->empty() ? ScalarField(grid) : (*source)(t_new);
    const VectorXcd step = (u_new.values() - u.values()) / h + op.apply(u_new).values() + react_new.f - s_new.values();
    d.step_residual = weighted_norm(step, weights, 2.0);

    w = std::move(w_new);
    u = std::move(u_new);
    t = t_new;
    u_e = recover(u, t, d);
    d.extracellular_mean = mean_defect(u_e);
    const bool fields = config.keep_fields ? (n % config.stride == 0 || n == steps) : n == steps;
    emit(t, u, u_e, d, fields);
  }
  return traj;
}

double front_speed(const GridSpec& grid, const VectorXd& activation_times, Index from, Index to) {
  const double ta = activation_times[from], tb = activation_times[to];
  if (std::isnan(ta) || std::isnan(tb)) throw InvalidArgument("front did not reach both probe nodes");
  if (tb == ta) throw InvalidArgument("probe nodes activated simultaneously");
  const auto xa = grid.coordinates(from), xb = grid.coordinates(to);
  double dist2 = 0.0;
  for (int a = 0; a < grid.dim(); ++a) dist2 += (xb[a] - xa[a]) * (xb[a] - xa[a]);
  return std::sqrt(dist2) / (tb - ta);
}

}  // namespace bidomain
