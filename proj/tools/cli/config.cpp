#include "cli/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <toml.hpp>

#include "bidomain/conductivity.hpp"
#include "bidomain/field_io.hpp"

namespace bidomain::cli {

namespace {

constexpr double pi = std::numbers::pi;

Json to_json(const toml::node& n) {
  if (const auto* t = n.as_table()) {
    Json j = Json::object();
    for (auto&& [key, value] : *t) j[std::string(key.str())] = to_json(value);
    return j;
  }
  if (const auto* a = n.as_array()) {
    Json j = Json::array();
    for (auto&& value : *a) j.push_back(to_json(value));
    return j;
  }
  if (const auto* v = n.as_string()) return v->get();
  if (const auto* v = n.as_integer()) return v->get();
  if (const auto* v = n.as_floating_point()) {
    // JSON has no infinity; keep it as the string the p-list parser accepts.
    if (std::isinf(v->get())) return v->get() > 0 ? "inf" : "-inf";
    return v->get();
  }
  if (const auto* v = n.as_boolean()) return v->get();
  // Dates and times stay as their TOML spelling.
  std::ostringstream os;
  n.visit([&](auto&& v) { os << v; });
  return os.str();
}

double number(const Json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return kInfNorm;
  }
  throw ConfigError("expected a number for " + what + ", got " + j.dump());
}

std::vector<double> numbers(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + " must be an array");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(number(v, what));
  return out;
}

Boundary boundary_from(const Json& j) {
  const auto s = j.is_string() ? j.get<std::string>() : std::string();
  if (s == "periodic") return Boundary::periodic;
  if (s == "neumann_box" || s == "neumann" || s == "box") return Boundary::neumann_box;
  throw ConfigError("unknown boundary " + j.dump() + " (periodic or neumann_box)");
}

Eigen::MatrixXd matrix_from(const Json& j, int d) {
  if (!j.is_array() || static_cast<int>(j.size()) != d) throw ConfigError("tensor must be a d x d nested array");
  Eigen::MatrixXd m(d, d);
  for (int r = 0; r < d; ++r) {
    const auto row = numbers(j[r], "tensor row");
    if (static_cast<int>(row.size()) != d) throw ConfigError("tensor must be a d x d nested array");
    for (int c = 0; c < d; ++c) m(r, c) = row[c];
  }
  return m;
}

std::vector<Direction> fibers_from(const GridSpec& grid, Json& node) {
  if (!node.contains("fibers")) node["fibers"] = "boundary_tangent";
  const Json& f = node["fibers"];
  if (f.is_string() && f.get<std::string>() == "boundary_tangent") return boundary_tangent_fibers(grid);
  Direction a = Direction::Zero();
  if (f.is_object() && f.contains("angle")) {
    if (grid.dim() != 2) throw ConfigError("fiber angle needs a 2D grid");
    const double t = number(f["angle"], "fiber angle");
    a << std::cos(t), std::sin(t), 0.0;
  } else if (f.is_array()) {
    const auto v = numbers(f, "fiber direction");
    if (static_cast<int>(v.size()) != grid.dim()) throw ConfigError("fiber direction must have d components");
    for (int c = 0; c < grid.dim(); ++c) a[c] = v[c];
    if (a.norm() == 0.0) throw ConfigError("fiber direction must be nonzero");
    a.normalize();
  } else {
    throw ConfigError("fibers must be \"boundary_tangent\", a vector or {angle = ...}");
  }
  return std::vector<Direction>(static_cast<std::size_t>(grid.size()), a);
}

TimeSeriesField series_from(const GridSpec& grid, Json& node, std::uint64_t seed) {
  if (node.is_null()) return {};
  if (node.is_object()) return TimeSeriesField::constant(parse_field(grid, node, seed));
  if (!node.is_array()) throw ConfigError("a source is a field or an array of {t, field} samples");
  std::vector<double> times;
  std::vector<ScalarField> fields;
  for (auto& sample : node) {
    if (!sample.is_object() || !sample.contains("t") || !sample.contains("field"))
      throw ConfigError("source samples need 't' and 'field'");
    times.push_back(number(sample["t"], "source time"));
    fields.push_back(parse_field(grid, sample["field"], seed));
  }
  return TimeSeriesField(std::move(times), std::move(fields));
}

}  // namespace

Json& section(Json& node, const char* key) {
  if (!node.is_object()) throw ConfigError("expected a table around '" + std::string(key) + "'");
  if (!node.contains(key)) node[key] = Json::object();
  Json& s = node[key];
  if (!s.is_object()) throw ConfigError("'" + std::string(key) + "' must be a table");
  return s;
}

Json parse_toml(const std::string& text) {
  try {
    return to_json(toml::parse(text));
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "TOML parse error: " << e.description() << " at " << e.source().begin;
    throw ConfigError(os.str());
  }
}

Json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const bool toml_file = path.size() >= 5 && path.substr(path.size() - 5) == ".toml";
  Json j;
  if (toml_file) {
    j = parse_toml(buffer.str());
  } else {
    try {
      j = Json::parse(buffer.str());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("JSON parse error: ") + e.what());
    }
  }
  if (!j.is_object()) throw ConfigError("config root must be a table");
  return j;
}

GridSpec parse_grid(Json& node) {
  if (!node.contains("points")) node["points"] = {16, 16};
  std::vector<Index> points;
  for (const auto& p : node["points"]) {
    if (!p.is_number_integer()) throw ConfigError("grid points must be integers");
    points.push_back(p.get<Index>());
  }
  const std::size_t d = points.size();
  if (!node.contains("extents")) node["extents"] = std::vector<double>(d, 1.0);
  const auto extents = numbers(node["extents"], "grid extents");
  if (!node.contains("boundary")) node["boundary"] = "periodic";
  std::vector<Boundary> bounds;
  if (node["boundary"].is_array()) {
    for (const auto& b : node["boundary"]) bounds.push_back(boundary_from(b));
  } else {
    bounds.assign(d, boundary_from(node["boundary"]));
  }
  return GridSpec(extents, points, bounds);
}

LinearSolverOptions parse_solver(Json& node) {
  LinearSolverOptions o;
  o.tolerance = value(node, "tolerance", o.tolerance);
  o.max_iterations = value(node, "max_iterations", o.max_iterations);
  o.assembly_cap = value(node, "assembly_cap", o.assembly_cap);
  o.dense_cap = value(node, "dense_cap", o.dense_cap);
  const auto method = value<std::string>(node, "method", "automatic");
  if (method == "automatic") o.method = LinearSolverOptions::Method::automatic;
  else if (method == "direct") o.method = LinearSolverOptions::Method::direct;
  else if (method == "iterative") o.method = LinearSolverOptions::Method::iterative;
  else throw ConfigError("solver method must be automatic, direct or iterative");
  return o;
}

ConductivityPtr parse_conductivity(const GridSpec& grid, Json& node, double k_l, double k_t) {
  if (node.contains("tensor")) {
    return std::make_shared<const ConductivityTensorField>(
        ConductivityTensorField::constant(grid, matrix_from(node["tensor"], grid.dim())));
  }
  const double kl = value(node, "k_l", k_l);
  const double kt = value(node, "k_t", k_t);
  const auto fibers = fibers_from(grid, node);
  return std::make_shared<const ConductivityTensorField>(
      make_conductivity(grid, VectorXd::Constant(grid.size(), kl), VectorXd::Constant(grid.size(), kt), fibers));
}

std::shared_ptr<const BidomainOperator> build_operator(Json& config) {
  const GridSpec grid = parse_grid(section(config, "grid"));
  Json& cond = section(config, "conductivity");
  auto sigma_i = parse_conductivity(grid, section(cond, "intra"), 3.0, 0.3);
  auto sigma_e = parse_conductivity(grid, section(cond, "extra"), 2.0, 0.8);
  const auto options = parse_solver(section(config, "solver"));
  return std::make_shared<const BidomainOperator>(std::move(sigma_i), std::move(sigma_e), options);
}

ScalarField parse_field(const GridSpec& grid, Json& node, std::uint64_t seed) {
  if (node.is_number()) return ScalarField::constant(grid, node.get<double>());
  if (!node.is_object()) throw ConfigError("a field is a number or a table with a 'type'");
  const auto type = value<std::string>(node, "type", "constant");
  ScalarField f;
  if (type == "constant") {
    f = ScalarField::constant(grid, value(node, "value", 0.0));
  } else if (type == "step") {
    const int axis = value(node, "axis", 0);
    if (axis < 0 || axis >= grid.dim()) throw ConfigError("step axis out of range");
    const double pos = value(node, "position", 0.5 * grid.extent(axis));
    const double below = value(node, "below", 1.0), above = value(node, "above", 0.0);
    f = ScalarField::sample(grid, [&](auto x) { return x[axis] < pos ? below : above; });
  } else if (type == "gaussian") {
    std::vector<double> center;
    for (int a = 0; a < grid.dim(); ++a) center.push_back(0.5 * grid.extent(a));
    center = value(node, "center", center);
    if (static_cast<int>(center.size()) != grid.dim()) throw ConfigError("gaussian center must have d components");
    const double width = value(node, "width", 0.1), amp = value(node, "amplitude", 1.0);
    if (!(width > 0)) throw ConfigError("gaussian width must be positive");
    f = ScalarField::sample(grid, [&](auto x) {
      double r2 = 0.0;
      for (int a = 0; a < grid.dim(); ++a) r2 += (x[a] - center[a]) * (x[a] - center[a]);
      return amp * std::exp(-r2 / (2 * width * width));
    });
  } else if (type == "mode") {
    const auto k = value(node, "k", std::vector<double>(grid.dim(), 1.0));
    if (static_cast<int>(k.size()) != grid.dim()) throw ConfigError("mode k must have d components");
    const double amp = value(node, "amplitude", 1.0);
    f = ScalarField::sample(grid, [&](auto x) {
      double phase = 0.0;
      for (int a = 0; a < grid.dim(); ++a) phase += 2 * pi * k[a] * x[a] / grid.extent(a);
      return amp * std::cos(phase);
    });
  } else if (type == "random") {
    const auto s = value<std::uint64_t>(node, "seed", seed);
    const double amp = value(node, "amplitude", 1.0);
    f = random_sources(grid, 1, s).front();
    f.values() *= amp;
  } else if (type == "file") {
    f = read_field_dump(value<std::string>(node, "path", ""));
    if (f.grid() != grid) throw ConfigError("field file does not match the configured grid");
  } else {
    throw ConfigError("unknown field type '" + type + "'");
  }
  if (value(node, "mean_zero", false)) f = project_mean_zero(f);
  return f;
}

ProbeSettings parse_probe(Json& node) {
  ProbeSettings out;
  SectorSpec& s = out.spec;
  s.epsilon = value(node, "epsilon", s.epsilon);
  s.min_modulus = value(node, "min_modulus", s.min_modulus);
  if (!node.contains("moduli")) node["moduli"] = Json{{"from_exp", 0.0}, {"to_exp", 6.0}, {"per_decade", 1}};
  Json& mod = node["moduli"];
  if (mod.is_object()) {
    s.moduli = SectorSpec::geometric_ladder(value(mod, "from_exp", 0.0), value(mod, "to_exp", 6.0),
                                            value(mod, "per_decade", 1));
  } else {
    s.moduli = numbers(mod, "moduli");
  }
  if (!node.contains("angles")) node["angles"] = {-(pi - s.epsilon), 0.0, pi - s.epsilon};
  s.angles = numbers(node["angles"], "angles");
  if (!node.contains("p")) node["p"] = {2.0, "inf"};
  s.p_list = numbers(node["p"], "p");
  for (auto& p : node["p"])
    if (p.is_number() && std::isinf(p.get<double>())) p = "inf";
  s.slope_decades = value(node, "slope_decades", s.slope_decades);
  s.flatness_tolerance = value(node, "flatness_tolerance", s.flatness_tolerance);
  out.sources = value(node, "sources", out.sources);
  if (out.sources < 0) throw ConfigError("sources must be nonnegative");
  out.constant_source = value(node, "constant_source", out.constant_source);
  if (out.sources == 0 && !out.constant_source) throw ConfigError("probe needs at least one source");
  out.epsilon_trend = value(node, "epsilon_trend", std::vector<double>{});
  s.validate();
  return out;
}

IonicModel parse_model(Json& node) {
  const auto preset = value<std::string>(node, "preset", "fitzhugh_nagumo");
  IonicModel model;
  if (preset == "fitzhugh_nagumo") {
    FhnParameters p;
    p.c = value(node, "c", p.c);
    p.a = value(node, "a", p.a);
    p.alpha = value(node, "alpha", p.alpha);
    p.beta = value(node, "beta", p.beta);
    p.gamma = value(node, "gamma", p.gamma);
    model = fitzhugh_nagumo(p);
  } else if (preset == "passive") {
    model = passive_model(value(node, "m", 1));
  } else {
    throw ConfigError("unknown ionic preset '" + preset + "' (fitzhugh_nagumo or passive)");
  }
  return model;
}

SimulationSettings parse_simulation(std::shared_ptr<const BidomainOperator> op, Json& node, std::uint64_t seed) {
  SimulationSettings out;
  SimulationConfig& c = out.config;
  const GridSpec& grid = op->grid();
  c.op = std::move(op);
  c.model = parse_model(section(node, "model"));
  c.model.trust_region = value(node, "trust_region", c.model.trust_region);
  c.dt = value(node, "dt", c.dt);
  c.t_end = value(node, "t_end", c.t_end);
  c.stride = value(node, "stride", c.stride);
  c.activation_threshold = value(node, "activation_threshold", c.activation_threshold);
  out.write_fields = value(node, "write_fields", out.write_fields);
  c.keep_fields = out.write_fields;

  Json& init = section(node, "initial");
  if (!init.contains("u")) init["u"] = Json{{"type", "constant"}, {"value", 0.0}};
  c.u0 = parse_field(grid, init["u"], seed);
  if (init.contains("w")) {
    if (!init["w"].is_array()) throw ConfigError("initial w must be an array of fields");
    for (auto& w : init["w"]) c.w0.push_back(parse_field(grid, w, seed));
  }

  Json& src = section(node, "sources");
  if (src.contains("intra")) c.s_i = series_from(grid, src["intra"], seed);
  if (src.contains("extra")) c.s_e = series_from(grid, src["extra"], seed);

  if (node.contains("front")) {
    Json& front = node["front"];
    out.front_from = numbers(front.value("from", Json::array()), "front.from");
    out.front_to = numbers(front.value("to", Json::array()), "front.to");
    if (static_cast<int>(out.front_from.size()) != grid.dim() || static_cast<int>(out.front_to.size()) != grid.dim())
      throw ConfigError("front probes need d coordinates each");
  }
  return out;
}

}  // namespace bidomain::cli
