#include "cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "bidomain/field_io.hpp"
#include "bidomain/fourier_oracle.hpp"

#ifndef BIDOMAIN_VERSION
#define BIDOMAIN_VERSION "0.0.0"
#endif

namespace bidomain::cli {

namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;
constexpr double nan = std::numeric_limits<double>::quiet_NaN();

// Collects named threshold checks into a report array.
class CheckList {
public:
  bool upper(const std::string& name, double value, double threshold, Json detail = {}) {
    return add(name, value, threshold, "<=", value <= threshold, std::move(detail));
  }
  bool lower(const std::string& name, double value, double threshold, Json detail = {}) {
    return add(name, value, threshold, ">=", value >= threshold, std::move(detail));
  }
  bool all_pass() const { return failed_ == 0; }
  std::size_t size() const { return checks_.size(); }
  std::size_t failed() const { return failed_; }
  const Json& json() const { return checks_; }

private:
  bool add(const std::string& name, double value, double threshold, const char* relation, bool pass, Json detail) {
    Json c{{"name", name}, {"value", value}, {"threshold", threshold}, {"relation", relation}, {"pass", pass}};
    if (!detail.is_null()) c["detail"] = std::move(detail);
    checks_.push_back(std::move(c));
    if (!pass) ++failed_;
    return pass;
  }

  Json checks_ = Json::array();
  std::size_t failed_ = 0;
};

std::string headline(const std::string& command, const CheckList& checks) {
  std::ostringstream os;
  os << command << ": " << (checks.all_pass() ? "PASS" : "FAIL") << " (" << checks.size() - checks.failed() << "/"
     << checks.size() << " checks)";
  return os.str();
}

fs::path prepare(const GlobalOptions& options) {
  const fs::path dir(options.out_dir);
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

Json grid_json(const GridSpec& g) {
  Json b = Json::array();
  for (auto x : g.boundaries()) b.push_back(x == Boundary::periodic ? "periodic" : "neumann_box");
  return Json{{"points", g.point_counts()}, {"extents", g.extents()}, {"boundary", b}};
}

double sup(const VectorXcd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

double relative_sup(const VectorXcd& a, const VectorXcd& b) {
  const double scale = sup(b);
  return scale > 0 ? sup(a - b) / scale : sup(a);
}

double l2(const BidomainOperator& op, const VectorXcd& v) { return weighted_norm(v, op.weights(), 2.0); }

std::vector<Complex> parse_lambdas(Json& node, const char* key, std::vector<Complex> fallback) {
  if (!node.contains(key)) {
    Json list = Json::array();
    for (Complex z : fallback) list.push_back(complex_json(z));
    node[key] = list;
  }
  std::vector<Complex> out;
  for (const auto& z : node[key]) {
    if (z.is_number()) {
      out.emplace_back(z.get<double>(), 0.0);
    } else if (z.is_array() && z.size() == 2 && z[0].is_number() && z[1].is_number()) {
      out.emplace_back(z[0].get<double>(), z[1].get<double>());
    } else {
      throw ConfigError("lambda must be a number or [re, im], got " + z.dump());
    }
  }
  if (out.empty()) throw ConfigError(std::string("'") + key + "' must not be empty");
  for (Complex z : out) require_off_cut(z);
  return out;
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

Index nearest_node(const GridSpec& g, const std::vector<double>& x) {
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < g.size(); ++j) {
    const auto c = g.coordinates(j);
    double d = 0.0;
    for (int a = 0; a < g.dim(); ++a) d += (c[a] - x[a]) * (c[a] - x[a]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

// Mode-by-mode relative error of op.apply against h(k) on one field.
double modewise_error(const BidomainOperator& op, const FourierOracle& oracle, const ScalarField& f) {
  const GridSpec& g = op.grid();
  const VectorXcd in = fft_forward(g, f.values());
  const VectorXcd out = fft_forward(g, op.apply(f).values());
  const VectorXd& h = oracle.harmonic_symbols();
  const double scale = h.maxCoeff() * sup(in);
  double worst = 0.0;
  for (Index k = 0; k < in.size(); ++k) {
    const double ref = h[k] * std::abs(in[k]);
    // Modes with a vanishing coefficient or symbol are compared on the global scale.
    const double denom = ref > 1e-8 * scale ? ref : scale;
    worst = std::max(worst, std::abs(out[k] - h[k] * in[k]) / denom);
  }
  return worst;
}

void write_timeseries(const fs::path& path, const Trajectory& traj) {
  std::ofstream out(path);
  out << std::setprecision(17);
  out << "t,u_sup,w_sup,compatibility_defect,step_residual,elliptic_residual,extracellular_mean\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const auto& d = traj.series[k];
    out << traj.times[k] << ',' << d.u_sup << ',' << d.w_sup << ',' << d.compatibility_defect << ','
        << d.step_residual << ',' << d.elliptic_residual << ',' << d.extracellular_mean << '\n';
  }
}

}  // namespace

std::string toolkit_version() { return BIDOMAIN_VERSION; }

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const TrustRegionExceeded*>(&e)) return kTrustRegion;
  if (dynamic_cast<const LinearSolveDivergence*>(&e) || dynamic_cast<const NonSymmetric*>(&e)) return kRuntimeFailure;
  if (dynamic_cast<const nlohmann::json::exception*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const InvalidArgument*>(&e) || dynamic_cast<const EllipticityViolation*>(&e) ||
      dynamic_cast<const EVViolation*>(&e) || dynamic_cast<const SymmetryViolation*>(&e) ||
      dynamic_cast<const GridMismatch*>(&e) || dynamic_cast<const LambdaOnCut*>(&e) ||
      dynamic_cast<const CompatibilityViolation*>(&e) || dynamic_cast<const IncompatibleMeans*>(&e) ||
      dynamic_cast<const ThetaOutOfSector*>(&e) || dynamic_cast<const NotMeanZero*>(&e) ||
      dynamic_cast<const TooLargeToAssemble*>(&e))
    return kConfigError;
  return kRuntimeFailure;
}

CommandResult cmd_check_operator(Json& config, const GlobalOptions& options) {
  const auto op = build_operator(config);
  Json& sec = section(config, "checks");
  const int trials = value(sec, "trials", 50);
  const int pseudo_trials = value(sec, "pseudo_trials", 20);
  if (trials < 1 || pseudo_trials < 1) throw ConfigError("check trials must be positive");
  const GridSpec& g = op->grid();
  const std::uint64_t seed = options.seed;
  CheckList checks;

  checks.upper("adjoint_defect", op->adjoint_defect(trials, seed), 1e-9);
  checks.lower("quadratic_form_minimum", op->quadratic_form_minimum(trials, seed), -1e-9);
  checks.upper("constants_in_kernel", discrete_norm(op->apply(ScalarField::constant(g, 1.0)), kInfNorm), 1e-12);

  const ScalarField f = random_sources(g, 1, seed).front();
  checks.upper("operator_forms_agree", relative_sup(op->apply_alternative(f).values(), op->apply(f).values()), 1e-9);

  const Complex lambda(1.0, 1.0);
  const auto sol = op->solve_resolvent(lambda, f);
  checks.upper("resolvent_round_trip", sol.residuals.operator_equation, 1e-9);
  checks.upper("triplet_identity", relative_sup(sol.u_i.values() - sol.u_e.values(), sol.u.values()), 1e-10);
  checks.upper("extracellular_mean", sol.residuals.extracellular_mean, 1e-10);
  checks.upper("pseudo_resolvent_defect",
               pseudo_resolvent_defect(*op, Complex(1, 10), Complex(5, -3), pseudo_trials, seed), 1e-7);

  double excess = -std::numeric_limits<double>::infinity();
  bool exact = true;
  for (double l : {1.0, 10.0, 100.0}) {
    const auto est = resolvent_norm(*op, l, 2.0, 8, seed);
    excess = std::max(excess, est.value - 1.0 / l);
    exact = exact && est.exact;
  }
  checks.upper("real_axis_resolvent_bound", excess, 1e-9, Json{{"exact", exact}});

  const bool dense = g.size() <= op->options().dense_cap;
  if (dense) {
    const auto& sd = op->spectral_decomposition();
    checks.lower("smallest_eigenvalue", sd.eigenvalues[0], -1e-9);
    const VectorXd v = sd.eigenvectors.col(0).cwiseQuotient(sd.sqrt_weights);
    checks.upper("kernel_is_constants", (v.array() - v.mean()).abs().maxCoeff() / v.cwiseAbs().maxCoeff(), 1e-8);
    checks.lower("kernel_is_one_dimensional", sd.eigenvalues.size() > 1 ? sd.eigenvalues[1] : 0.0, 1e-8);
    const Eigen::MatrixXd m = op->weighted_matrix();
    checks.upper("dense_asymmetry", (m - m.transpose()).norm() / m.norm(), 1e-9);
  }

  auto bounds = [](const ConductivityTensorField& s) {
    return Json{{"lower", s.lower_bound()}, {"upper", s.upper_bound()}, {"constant", s.is_constant()}};
  };
  CommandResult r;
  r.report = Json{{"command", "check-operator"},
                  {"grid", grid_json(g)},
                  {"conductivity", {{"intra", bounds(op->sigma_i())}, {"extra", bounds(op->sigma_e())}}},
                  {"dense_checks", dense},
                  {"checks", checks.json()},
                  {"pass", checks.all_pass()}};
  const fs::path dir = prepare(options);
  write_json(dir / "check_operator.json", r.report);
  r.outputs = {"check_operator.json"};
  r.exit_code = checks.all_pass() ? kPass : kRuntimeFailure;
  r.headline = headline("check-operator", checks);
  return r;
}

CommandResult cmd_probe(Json& config, const GlobalOptions& options) {
  const auto op = build_operator(config);
  const ProbeSettings settings = parse_probe(section(config, "probe"));
  const GridSpec& g = op->grid();
  auto sources = random_sources(g, settings.sources, options.seed);
  const int constant_id = settings.constant_source ? static_cast<int>(sources.size()) : -1;
  if (settings.constant_source) sources.push_back(ScalarField::constant(g, 1.0));

  const auto report = sweep_sector(*op, settings.spec, sources, options.threads);
  const SweepSummary& s = report.summary;

  // The constant source solves to s / lambda, so its ratios are 1 up to the
  // rounding of |lambda| |c / lambda|.
  double constant_deviation = 0.0;
  for (const auto& row : report.rows)
    if (row.source_id == constant_id)
      constant_deviation =
          std::max({constant_deviation, std::abs(row.n_value - 1.0), std::abs(row.norm_ratio - 1.0)});
  const bool constant_ok = constant_id < 0 || constant_deviation <= 4 * std::numeric_limits<double>::epsilon();

  Json per_p = Json::array();
  for (const auto& p : s.per_p)
    per_p.push_back(Json{{"p", std::isinf(p.p) ? Json("inf") : Json(p.p)},
                         {"max_norm_ratio", p.max_norm_ratio},
                         {"norm_slope", p.norm_slope},
                         {"grad_slope", p.grad_slope},
                         {"hess_slope", p.hess_slope}});
  Json failures = Json::array();
  for (const auto& f : report.failures)
    failures.push_back(Json{{"lambda", complex_json(f.lambda)}, {"source_id", f.source_id}, {"message", f.message}});

  Json summary{{"epsilon", s.epsilon},
               {"window_floor", s.window_floor},
               {"max_n_value", s.max_n_value},
               {"n_slope", s.n_slope},
               {"max_residual", s.max_residual},
               {"flatness_tolerance", settings.spec.flatness_tolerance},
               {"per_p", per_p},
               {"flat", s.flat},
               {"rows", report.rows.size()},
               {"failures", failures}};
  summary["constant_source"] = constant_id < 0 ? Json(nullptr)
                                               : Json{{"source_id", constant_id},
                                                      {"max_deviation", constant_deviation},
                                                      {"pass", constant_ok}};
  if (!settings.epsilon_trend.empty()) {
    const auto trend = epsilon_trend(*op, settings.spec, settings.epsilon_trend, sources, kInfNorm, options.threads);
    bool monotone = true;
    for (std::size_t k = 1; k < trend.size(); ++k)
      if (settings.epsilon_trend[k] > settings.epsilon_trend[k - 1]) monotone = monotone && trend[k] <= trend[k - 1] * (1 + 1e-12);
    summary["epsilon_trend"] = Json{{"epsilons", settings.epsilon_trend}, {"max_norm_ratio_inf", trend}, {"non_increasing", monotone}};
  }

  const fs::path dir = prepare(options);
  {
    std::ofstream csv(dir / "sweep.csv");
    write_sweep_csv(csv, report);
  }
  CommandResult r;
  r.report = Json{{"command", "probe"}, {"grid", grid_json(g)}, {"summary", summary}};
  write_json(dir / "sweep_summary.json", r.report);
  r.outputs = {"sweep.csv", "sweep_summary.json"};
  const bool pass = s.flat && report.failures.empty() && constant_ok;
  r.exit_code = pass ? kPass : kRuntimeFailure;
  std::ostringstream os;
  os << "probe: " << (pass ? "PASS" : "FAIL") << " (" << report.rows.size() << " rows, " << report.failures.size()
     << " failures, flat=" << (s.flat ? "yes" : "no") << ")";
  r.headline = os.str();
  return r;
}

CommandResult cmd_oracle_compare(Json& config, const GlobalOptions& options) {
  const auto op = build_operator(config);
  Json& sec = section(config, "oracle");
  const int count = value(sec, "sources", 5);
  if (count < 1) throw ConfigError("oracle sources must be positive");
  const auto lambdas = parse_lambdas(sec, "lambdas", {Complex(1, 0), Complex(-100, 30), Complex(0, 1e4)});
  const GridSpec& g = op->grid();
  if (!op->constant_coefficients())
    throw ConfigError("oracle-compare needs constant conductivities");
  const auto sources = random_sources(g, count, options.seed);
  CheckList checks;
  std::string mode;

  if (g.all_periodic()) {
    mode = "torus";
    const auto oracle = FourierOracle::from_operator(*op);
    double apply_err = 0.0, resolvent_err = 0.0, extra_err = 0.0;
    for (const auto& s : sources) {
      apply_err = std::max(apply_err, modewise_error(*op, oracle, s));
      extra_err = std::max(extra_err, relative_sup(op->recover_extracellular(s).values(), oracle.extracellular(s).values()));
      for (Complex l : lambdas)
        resolvent_err = std::max(resolvent_err, sup(op->resolve(l, s).values() - oracle.resolvent(l, s).values()) /
                                                    discrete_norm(s, kInfNorm));
    }
    checks.upper("apply_modewise", apply_err, 1e-9);
    checks.upper("resolvent_sup", resolvent_err, 1e-8);
    checks.upper("extracellular_sup", extra_err, 1e-9);

    const int triples = value(sec, "dual_triples", 100);
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> angle(-pi, pi);
    double dual = 0.0, margin = std::numeric_limits<double>::infinity();
    for (int t = 0; t < triples; ++t) {
      double theta = angle(rng);
      while (std::abs(theta) >= pi) theta = angle(rng);
      const auto psi = random_sources(g, 2, rng());
      const ScalarField psi_i = psi[0];
      const ScalarField psi_e(g, psi[1].values().array() + (mean(psi_i) - mean(psi[1])));
      const auto [phi_i, phi_e] = oracle.dual_solution(theta, psi_i, psi_e);
      const auto [ri, re] = oracle.dual_residuals(theta, phi_i, phi_e, psi_i, psi_e);
      dual = std::max({dual, ri, re});
      margin = std::min(margin, oracle.denominator_margin(theta) / std::sin(0.5 * (pi - std::abs(theta))));
    }
    checks.upper("dual_residual_l2", dual, 1e-8, Json{{"triples", triples}});
    checks.lower("denominator_margin_ratio", margin, 1.0 - 1e-12);
  } else {
    if (!op->sigma_i().is_diagonal() || !op->sigma_e().is_diagonal())
      throw ConfigError("reflection comparison needs diagonal conductivities");
    mode = "reflection";
    const GridSpec ext = even_extension(ScalarField(g)).grid();
    const FourierOracle oracle(ConstantCoeffProblem{op->sigma_i().block(0), op->sigma_e().block(0), 0.0, ext});
    double err = 0.0;
    for (const auto& s : sources)
      for (Complex l : lambdas) {
        const auto torus = restrict_to_box(oracle.resolvent(l, even_extension(s)), g);
        err = std::max(err, relative_sup(op->resolve(l, s).values(), torus.values()));
      }
    checks.upper("reflected_resolvent", err, 1e-7);
  }

  Json lam = Json::array();
  for (Complex l : lambdas) lam.push_back(complex_json(l));
  CommandResult r;
  r.report = Json{{"command", "oracle-compare"}, {"grid", grid_json(g)}, {"mode", mode},
                  {"lambdas", lam},          {"checks", checks.json()}, {"pass", checks.all_pass()}};
  const fs::path dir = prepare(options);
  write_json(dir / "oracle_compare.json", r.report);
  r.outputs = {"oracle_compare.json"};
  r.exit_code = checks.all_pass() ? kPass : kRuntimeFailure;
  r.headline = headline("oracle-compare", checks);
  return r;
}

CommandResult cmd_fractional(Json& config, const GlobalOptions& options) {
  const auto op = build_operator(config);
  Json& sec = section(config, "fractional");
  const auto alphas = value(sec, "alphas", std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  const double shift = value(sec, "shift", 1.0);
  const int samples = value(sec, "samples", 5);
  for (double a : alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("fractional alphas must lie in [0, 1]");
  if (!(shift > 0.0)) throw ConfigError("fractional shift must be positive");
  if (samples < 1) throw ConfigError("fractional samples must be positive");
  const GridSpec& g = op->grid();
  if (g.size() > op->options().dense_cap)
    throw TooLargeToAssemble("fractional powers need the dense eigendecomposition; grid exceeds dense_cap");

  std::vector<ScalarField> fields = random_sources(g, samples, options.seed);
  if (sec.contains("field")) fields.push_back(parse_field(g, sec["field"], options.seed));

  double identity = 0.0, first = 0.0, moment = 0.0;
  Json norms = Json::array();
  for (const auto& f : fields) {
    const double nf = l2(*op, f.values());
    const auto zero = op->fractional_apply(0.0, shift, f);
    identity = std::max({identity, l2(*op, zero.field.values() - f.values()) / nf, std::abs(zero.z_alpha_norm - nf) / nf});
    const auto one = op->fractional_apply(1.0, shift, f);
    const VectorXcd direct = op->apply(f).values() + shift * f.values();
    first = std::max(first, l2(*op, one.field.values() - direct) / l2(*op, direct));
    const double half = op->fractional_apply(0.5, shift, f).z_alpha_norm;
    moment = std::max(moment, half * half / (nf * one.z_alpha_norm));
    Json row = Json::array();
    for (double a : alphas) row.push_back(op->fractional_apply(a, shift, f).z_alpha_norm);
    norms.push_back(row);
  }
  CheckList checks;
  checks.upper("alpha_zero_identity", identity, 1e-8);
  checks.upper("alpha_one_equals_shifted_operator", first, 1e-8);
  checks.upper("moment_inequality_ratio", moment, 1.0 + 1e-8);

  CommandResult r;
  r.report = Json{{"command", "fractional"}, {"grid", grid_json(g)}, {"shift", shift},
                  {"alphas", alphas},        {"z_alpha_norms", norms},  {"checks", checks.json()},
                  {"pass", checks.all_pass()}};
  const fs::path dir = prepare(options);
  write_json(dir / "fractional.json", r.report);
  r.outputs = {"fractional.json"};
  r.exit_code = checks.all_pass() ? kPass : kRuntimeFailure;
  r.headline = headline("fractional", checks);
  return r;
}

CommandResult cmd_simulate(Json& config, const GlobalOptions& options) {
  const auto op = build_operator(config);
  const SimulationSettings settings = parse_simulation(op, section(config, "simulation"), options.seed);
  const GridSpec& g = op->grid();

  CommandResult r;
  Trajectory traj;
  Json status{{"state", "completed"}};
  try {
    traj = simulate_bidomain(settings.config);
  } catch (const TrustRegionExceeded& e) {
    traj = e.partial();
    status = Json{{"state", "trust_region_exceeded"},
                  {"message", e.what()},
                  {"blow_up_time", e.time()},
                  {"last_accepted", e.last_accepted()}};
    r.exit_code = kTrustRegion;
  }

  const fs::path dir = prepare(options);
  write_timeseries(dir / "timeseries.csv", traj);
  r.outputs.push_back("timeseries.csv");

  if (settings.write_fields && !traj.states.empty()) {
    fs::create_directories(dir / "fields");
    std::ofstream index(dir / "fields" / "index.csv");
    index << std::setprecision(17) << "state,t,u,u_e";
    for (int k = 0; k < settings.config.model.m; ++k) index << ",w" << k;
    index << '\n';
    r.outputs.push_back("fields/index.csv");
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
      const auto& st = traj.states[k];
      std::ostringstream stem;
      stem << "fields/state_" << std::setw(6) << std::setfill('0') << k;
      auto dump = [&](const std::string& suffix, const ScalarField& f) {
        const std::string name = stem.str() + "_" + suffix + ".bdk";
        write_field_dump((dir / name).string(), f, ScalarKind::real);
        r.outputs.push_back(name);
        index << ',' << name;
      };
      index << k << ',' << st.t;
      dump("u", st.u);
      dump("ue", st.u_e);
      for (std::size_t m = 0; m < st.w.size(); ++m) dump("w" + std::to_string(m), st.w[m]);
      index << '\n';
    }
  }
  write_field_dump((dir / "activation_times.bdk").string(), ScalarField(g, traj.activation_times.cast<Complex>()),
                   ScalarKind::real);
  r.outputs.push_back("activation_times.bdk");

  Json front = nullptr;
  if (!settings.front_from.empty()) {
    const Index a = nearest_node(g, settings.front_from), b = nearest_node(g, settings.front_to);
    front = Json{{"from_node", a}, {"to_node", b}, {"speed", nullptr}};
    try {
      front["speed"] = front_speed(g, traj.activation_times, a, b);
    } catch (const InvalidArgument& e) {
      front["note"] = e.what();
    }
  }

  double step = 0.0, elliptic = 0.0, compat = 0.0, emean = 0.0;
  for (const auto& d : traj.series) {
    step = std::max(step, d.step_residual);
    elliptic = std::max(elliptic, d.elliptic_residual);
    compat = std::max(compat, d.compatibility_defect);
    emean = std::max(emean, d.extracellular_mean);
  }
  const long steps = traj.times.empty() ? 0 : static_cast<long>(traj.times.size()) - 1;
  r.report = Json{{"command", "simulate"},
                  {"grid", grid_json(g)},
                  {"model", settings.config.model.name},
                  {"status", status},
                  {"steps", steps},
                  {"t_final", traj.times.empty() ? nan : traj.times.back()},
                  {"emitted_states", traj.states.size()},
                  {"max_step_residual", step},
                  {"max_elliptic_residual", elliptic},
                  {"max_compatibility_defect", compat},
                  {"max_extracellular_mean", emean},
                  {"front", front}};
  write_json(dir / "simulation_summary.json", r.report);
  r.outputs.push_back("simulation_summary.json");
  std::ostringstream os;
  os << "simulate: " << (r.exit_code == kPass ? "completed" : "trust region exceeded") << " (" << steps << " steps)";
  if (front.is_object() && front["speed"].is_number()) os << ", front speed " << front["speed"].get<double>();
  r.headline = os.str();
  return r;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  GlobalOptions g;
  CLI::App app{"Bidomain operator toolkit: operator checks, sector probes, oracle comparisons and simulation",
               "bidomain"};
  app.set_version_flag("--version", toolkit_version());
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.add_option("--config", g.config_path, "TOML or JSON config, or a run manifest to replay");
  auto* seed_opt = app.add_option("--seed", g.seed, "seed of every random source")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads for sweeps")->check(CLI::PositiveNumber)->capture_default_str();

  using Command = CommandResult (*)(Json&, const GlobalOptions&);
  const std::vector<std::tuple<std::string, std::string, Command>> commands{
      {"check-operator", "self-adjointness, kernel, spectrum and resolvent checks", cmd_check_operator},
      {"probe", "sector sweep of the resolvent estimates", cmd_probe},
      {"oracle-compare", "agreement with the Fourier oracle (torus) or its reflection (box)", cmd_oracle_compare},
      {"simulate", "bidomain simulation with an ionic model", cmd_simulate},
      {"fractional", "fractional powers of the shifted operator", cmd_fractional}};
  for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kPass : kConfigError;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  Command fn = nullptr;
  for (const auto& [n, help, f] : commands)
    if (n == name) fn = f;

  const std::string started = iso_now();
  Json config;
  CommandResult result;
  try {
    config = g.config_path.empty() ? Json::object() : load_config(g.config_path);
    if (config.contains("command") && config.contains("config") && config["config"].is_object()) {
      // A run manifest: replay its resolved config and seed.
      if (seed_opt->count() == 0 && config.contains("seed")) g.seed = config["seed"].get<std::uint64_t>();
      config = Json(config["config"]);
    } else if (seed_opt->count() == 0 && config.contains("seed")) {
      g.seed = config["seed"].get<std::uint64_t>();
    }
    config["seed"] = g.seed;
    result = fn(config, g);
  } catch (const std::exception& e) {
    err << name << ": " << e.what() << '\n';
    return exit_code_for(e);
  }

  const Json manifest{{"command", name},         {"version", toolkit_version()},
                      {"seed", g.seed},          {"threads", g.threads},
                      {"config", config},        {"started_at", started},
                      {"finished_at", iso_now()}, {"exit_code", result.exit_code},
                      {"outputs", result.outputs}};
  try {
    write_json(fs::path(g.out_dir) / (name + ".manifest.json"), manifest);
  } catch (const std::exception& e) {
    err << name << ": " << e.what() << '\n';
    return kRuntimeFailure;
  }
  out << result.headline << '\n';
  return result.exit_code;
}

}  // namespace bidomain::cli
