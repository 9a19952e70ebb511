#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bidomain/bidomain_operator.hpp"

namespace bidomain {

/// Samples of the sector {|arg lambda| <= pi - epsilon, |lambda| > M}.
struct SectorSpec {
  double epsilon = 0.25 * 3.141592653589793;
  double min_modulus = 0.0;          // M
  std::vector<double> moduli;        // |lambda| ladder
  std::vector<double> angles;        // arg lambda
  std::vector<double> p_list{2.0, kInfNorm};
  int slope_decades = 2;             // fit window at the top of the ladder
  double flatness_tolerance = 0.05;  // allowed growth slope

  /// LambdaOnCut for angles on the negative real axis or nonpositive
  /// moduli; InvalidArgument for anything else out of range.
  void validate() const;

  std::vector<Complex> samples() const;

  /// 10^lo, ..., 10^hi with `per_decade` points per decade.
  static std::vector<double> geometric_ladder(double lo_exp, double hi_exp, int per_decade = 1);
};

struct SweepRow {
  Complex lambda;
  double p = 2.0;
  int source_id = 0;
  double norm_ratio = 0.0;  // |lambda| ||u||_p / ||s||_p
  double grad_ratio = 0.0;  // |lambda|^{1/2} ||grad u||_p / ||s||_p
  double hess_ratio = 0.0;  // ||second differences of u||_p / ||s||_p
  double n_value = 0.0;     // N / ||s||_inf
  double residual = 0.0;    // worst relative residual of the solve
};

struct SweepFailure {
  Complex lambda;
  int source_id = 0;
  std::string message;
};

/// Least-squares slope of log(max quantity) against log|lambda| over the
/// fit window, per p.
struct PSummary {
  double p = 2.0;
  double max_norm_ratio = 0.0;  // empirical constant over the whole sweep
  double norm_slope = 0.0;
  double grad_slope = 0.0;
  double hess_slope = 0.0;
};

struct SweepSummary {
  double epsilon = 0.0;
  double window_floor = 0.0;  // smallest modulus inside the fit window
  double max_n_value = 0.0;
  double n_slope = 0.0;
  double max_residual = 0.0;
  std::vector<PSummary> per_p;
  std::size_t failures = 0;
  bool flat = false;  // every slope within the tolerance and no failures
};

struct SectorSweepReport {
  SectorSpec spec;
  std::vector<SweepRow> rows;  // sorted by (|lambda|, arg lambda, p, source)
  std::vector<SweepFailure> failures;
  SweepSummary summary;
};

/// sup_x |lambda||u| + |lambda|^{1/2}(|grad u| + |grad u_i| + |grad u_e|).
double n_functional(const ResolventSolution& sol);

/// Random fields with values uniform in [-1, 1], scaled to unit sup norm.
std::vector<ScalarField> random_sources(const GridSpec& grid, int count, std::uint64_t seed);

struct ResolventNormEstimate {
  double value = 0.0;
  bool exact = false;  // false: a lower bound
};

/// ||(lambda + A)^{-1}|| on L^p. Exact under the dense cap for p = 2 (largest
/// singular value in the weighted inner product) and p = inf (largest
/// absolute row sum); otherwise a lower bound from probing.
ResolventNormEstimate resolvent_norm(const BidomainOperator& op, Complex lambda, double p, int probes = 8,
                                     std::uint64_t seed = 1, bool allow_dense = true);

/// Max over random sources of ||R(l)s - R(m)s - (m - l)R(l)R(m)s||_2 divided
/// by max(||R(l)s||_2, ||R(m)s||_2).
double pseudo_resolvent_defect(const BidomainOperator& op, Complex lambda, Complex mu, int trials,
                               std::uint64_t seed = 1);

/// Solves every (lambda, source) sample on `threads` workers. Per-sample
/// errors are collected, never rethrown.
SectorSweepReport sweep_sector(const BidomainOperator& op, const SectorSpec& spec,
                               const std::vector<ScalarField>& sources, int threads = 1);

/// Recomputes the summary from the rows.
SweepSummary summarize(const SectorSpec& spec, const std::vector<SweepRow>& rows, std::size_t failures);

/// Largest |lambda| ||u||_p / ||s||_p for each epsilon, other settings kept.
std::vector<double> epsilon_trend(const BidomainOperator& op, SectorSpec spec, const std::vector<double>& epsilons,
                                  const std::vector<ScalarField>& sources, double p, int threads = 1);

/// Fixed-column CSV of the rows.
void write_sweep_csv(std::ostream& out, const SectorSweepReport& report);

}  // namespace bidomain
