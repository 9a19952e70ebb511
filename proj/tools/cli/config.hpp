#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "bidomain/bidomain_operator.hpp"
#include "bidomain/sector_probe.hpp"
#include "bidomain/simulation.hpp"

namespace bidomain::cli {

using Json = nlohmann::ordered_json;

/// Reads a TOML (.toml) or JSON (any other extension) document into one
/// JSON tree. Both formats share the schema documented in docs/config.md.
Json load_config(const std::string& path);
Json parse_toml(const std::string& text);

/// node[key], created as an empty table when missing.
Json& section(Json& node, const char* key);

/// node[key] converted to T; a missing key is set to `fallback`.
template <typename T>
T value(Json& node, const char* key, T fallback) {
  if (!node.is_object()) throw ConfigError("expected a table around '" + std::string(key) + "'");
  const auto it = node.find(key);
  if (it == node.end()) {
    node[key] = fallback;
    return fallback;
  }
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "': " + it->dump());
  }
}

// The parsers below take the config node by reference and write every
// default they apply back into it, so the node ends up as the resolved
// configuration recorded in the run manifest.

GridSpec parse_grid(Json& node);
LinearSolverOptions parse_solver(Json& node);
ConductivityPtr parse_conductivity(const GridSpec& grid, Json& node, double k_l, double k_t);
std::shared_ptr<const BidomainOperator> build_operator(Json& config);

/// Field recipes: constant, step, gaussian, mode, random, file.
ScalarField parse_field(const GridSpec& grid, Json& node, std::uint64_t seed);

struct ProbeSettings {
  SectorSpec spec;
  int sources = 10;
  bool constant_source = true;
  std::vector<double> epsilon_trend;
};
ProbeSettings parse_probe(Json& node);

struct SimulationSettings {
  SimulationConfig config;
  bool write_fields = true;
  std::vector<double> front_from, front_to;  // probe points for the front speed
};
SimulationSettings parse_simulation(std::shared_ptr<const BidomainOperator> op, Json& node, std::uint64_t seed);

IonicModel parse_model(Json& node);

}  // namespace bidomain::cli
