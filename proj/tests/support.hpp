#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "bidomain/bidomain_operator.hpp"
#include "bidomain/conductivity.hpp"
#include "bidomain/grid_fields.hpp"

namespace support {

using namespace bidomain;
inline constexpr double pi = std::numbers::pi;

inline GridSpec torus1(Index n, double length = 1.0) { return GridSpec({length}, {n}, Boundary::periodic); }
inline GridSpec torus2(Index n, double length = 1.0) {
  return GridSpec({length, length}, {n, n}, Boundary::periodic);
}
inline GridSpec box2(Index n, double length = 1.0) {
  return GridSpec({length, length}, {n, n}, Boundary::neumann_box);
}

inline ScalarField random_field(const GridSpec& g, std::uint64_t seed, bool complex_values = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  VectorXcd v(g.size());
  for (Index j = 0; j < g.size(); ++j) v[j] = Complex(normal(rng), complex_values ? normal(rng) : 0.0);
  return ScalarField(g, v);
}

inline ScalarField random_mean_zero(const GridSpec& g, std::uint64_t seed, bool complex_values = false) {
  return project_mean_zero(random_field(g, seed, complex_values));
}

inline ConductivityPtr constant_sigma(const GridSpec& g, const Eigen::MatrixXd& s) {
  return std::make_shared<const ConductivityTensorField>(ConductivityTensorField::constant(g, s));
}

inline ConductivityPtr fiber_sigma(const GridSpec& g, double k_l, double k_t) {
  return std::make_shared<const ConductivityTensorField>(make_conductivity(
      g, VectorXd::Constant(g.size(), k_l), VectorXd::Constant(g.size(), k_t), boundary_tangent_fibers(g)));
}

/// Typical anisotropic pair: intracellular ratio 10:1, extracellular 2.5:1.
inline BidomainOperator variable_operator(const GridSpec& g, LinearSolverOptions opts = {}) {
  return BidomainOperator(fiber_sigma(g, 3.0, 0.3), fiber_sigma(g, 2.0, 0.8), opts);
}

inline BidomainOperator constant_operator(const GridSpec& g, const Eigen::MatrixXd& si, const Eigen::MatrixXd& se,
                                          LinearSolverOptions opts = {}) {
  return BidomainOperator(constant_sigma(g, si), constant_sigma(g, se), opts);
}

inline std::shared_ptr<const BidomainOperator> shared_constant_operator(const GridSpec& g, const Eigen::MatrixXd& si,
                                                                         const Eigen::MatrixXd& se) {
  return std::make_shared<const BidomainOperator>(constant_sigma(g, si), constant_sigma(g, se));
}

inline std::shared_ptr<const BidomainOperator> shared_variable_operator(const GridSpec& g) {
  return std::make_shared<const BidomainOperator>(fiber_sigma(g, 3.0, 0.3), fiber_sigma(g, 2.0, 0.8));
}

inline Eigen::MatrixXd tensor2(double xx, double xy, double yy) {
  Eigen::MatrixXd m(2, 2);
  m << xx, xy, xy, yy;
  return m;
}

inline Eigen::MatrixXd scalar_tensor(int d, double c) { return c * Eigen::MatrixXd::Identity(d, d); }

/// Closed-form symbol of the corner-gradient stencil on a torus, for the
/// angular frequency k: sum_a s_aa 4 sin^2(k_a h_a / 2) / h_a^2
/// + sum_{a != b} s_ab sin(k_a h_a) sin(k_b h_b) / (h_a h_b).
inline double stencil_symbol(const Eigen::MatrixXd& s, const GridSpec& g, const Eigen::VectorXd& k) {
  double out = 0.0;
  for (int a = 0; a < g.dim(); ++a) {
    const double ha = g.spacing(a);
    for (int b = 0; b < g.dim(); ++b) {
      const double hb = g.spacing(b);
      if (a == b) {
        const double half = std::sin(0.5 * k[a] * ha);
        out += s(a, a) * 4.0 * half * half / (ha * ha);
      } else {
        out += s(a, b) * std::sin(k[a] * ha) * std::sin(k[b] * hb) / (ha * hb);
      }
    }
  }
  return out;
}

inline double rel_diff(const VectorXcd& a, const VectorXcd& b) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace support
