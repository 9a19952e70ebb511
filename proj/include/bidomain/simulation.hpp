#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "bidomain/bidomain_operator.hpp"

namespace bidomain {

/// Pointwise ionic current f(u, w) and gating dynamics g(u, w) with m gating
/// variables. The run stops once |u| or |w| leaves the trust region.
struct IonicModel {
  using Current = std::function<double(double u, std::span<const double> w)>;
  using Gating = std::function<void(double u, std::span<const double> w, std::span<double> out)>;

  std::string name = "custom";
  int m = 1;
  Current f;
  Gating g;
  double trust_region = 1e3;

  void validate() const;
};

/// f = c u (u - a)(u - 1) + alpha w, g = -beta u + gamma w.
struct FhnParameters {
  double c = 1.0;
  double a = 0.1;
  double alpha = 1.0;
  double beta = 0.005;
  double gamma = 0.0;
};

IonicModel fitzhugh_nagumo(const FhnParameters& p, double trust_region = 1e3);

/// f = g = 0: the linear bidomain flow.
IonicModel passive_model(int m = 1);

/// Samples (t_k, f_k) interpolated linearly in time and held constant
/// outside the sampled range. Empty means identically zero.
class TimeSeriesField {
public:
  TimeSeriesField() = default;
  TimeSeriesField(std::vector<double> times, std::vector<ScalarField> values);
  static TimeSeriesField constant(ScalarField value);

  bool empty() const noexcept { return times_.empty(); }
  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<ScalarField>& values() const noexcept { return values_; }
  ScalarField at(double t, const GridSpec& grid) const;

private:
  std::vector<double> times_;
  std::vector<ScalarField> values_;
};

/// t -> s_i(t) - A_i (A_i + A_e)^{-1}(s_i(t) + s_e(t)), one elliptic solve
/// per new t, cached.
class ModifiedSource {
public:
  ModifiedSource(std::shared_ptr<const BidomainOperator> op, TimeSeriesField s_i, TimeSeriesField s_e);

  ScalarField operator()(double t) const;
  ScalarField intra(double t) const { return s_i_.at(t, op_->grid()); }
  ScalarField extra(double t) const { return s_e_.at(t, op_->grid()); }
  bool empty() const noexcept { return s_i_.empty() && s_e_.empty(); }
  /// Relative mean of s_i(t) + s_e(t).
  double compatibility_defect(double t) const;

private:
  std::shared_ptr<const BidomainOperator> op_;
  TimeSeriesField s_i_, s_e_;
  mutable std::mutex mutex_;
  mutable std::map<double, ScalarField> cache_;
};

/// Throws CompatibilityViolation when some sample of s_i + s_e has a mean.
std::shared_ptr<ModifiedSource> make_source(std::shared_ptr<const BidomainOperator> op, TimeSeriesField s_i,
                                            TimeSeriesField s_e);

struct StepDiagnostics {
  double step_residual = 0.0;         // discrete evolution equation at the new time, relative
  double compatibility_defect = 0.0;  // relative mean of s_i + s_e
  double elliptic_residual = 0.0;     // constraint for u_e, relative
  double extracellular_mean = 0.0;    // relative mean of u_e
  double u_sup = 0.0;
  double w_sup = 0.0;
};

struct SimulationState {
  double t = 0.0;
  ScalarField u;
  std::vector<ScalarField> w;
  ScalarField u_e;
  StepDiagnostics diagnostics;
};

struct SimulationConfig {
  std::shared_ptr<const BidomainOperator> op;
  IonicModel model;
  ScalarField u0;
  std::vector<ScalarField> w0;  // m fields; empty means zero
  TimeSeriesField s_i, s_e;
  double dt = 1e-2;
  double t_end = 1.0;
  int stride = 1;                       // emit every stride-th step (and the last)
  bool keep_fields = true;              // false keeps only the time series
  double activation_threshold = 0.5;    // upward crossing recorded per node
};

struct Trajectory {
  std::vector<SimulationState> states;   // emitted states, including t = 0
  std::vector<double> times;             // every step
  std::vector<StepDiagnostics> series;   // every step
  VectorXd activation_times;             // NaN where never crossed
};

/// Stops the run when |u| or |w| leaves the trust region. Carries the time
/// of the violation and the trajectory up to the last accepted step.
class TrustRegionExceeded : public Error {
public:
  TrustRegionExceeded(const std::string& what, double time, double last_accepted, Trajectory partial)
      : Error(what), time_(time), last_accepted_(last_accepted), partial_(std::move(partial)) {}
  double time() const noexcept { return time_; }
  double last_accepted() const noexcept { return last_accepted_; }
  const Trajectory& partial() const noexcept { return partial_; }

private:
  double time_;
  double last_accepted_;
  Trajectory partial_;
};

/// IMEX stepping: A implicit through one resolvent solve at lambda = 1/dt,
/// f, g and the source explicit; u_e recovered after every step.
Trajectory simulate_bidomain(const SimulationConfig& config);

/// Speed between two nodes from their activation times.
double front_speed(const GridSpec& grid, const VectorXd& activation_times, Index from, Index to);

}  // namespace bidomain
