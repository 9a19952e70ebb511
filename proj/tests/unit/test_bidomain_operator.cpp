#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "doctest.h"
#include "support.hpp"

using namespace support;

namespace {

ScalarField mode2(const GridSpec& g, int kx, int ky) {
  return ScalarField::sample(g, [&](auto x) {
    return std::exp(Complex(0.0, 2 * pi * (kx * x[0] / g.extent(0) + ky * x[1] / g.extent(1))));
  });
}

double measured_eigenvalue(const EllipticOperator& op, const ScalarField& mode) {
  const VectorXcd out = op.apply(mode).values();
  return (out.array() / mode.values().array()).real().mean();
}

}  // namespace

TEST_CASE("constants are in the kernel") {
  const auto op = variable_operator(box2(9));
  CHECK(discrete_norm(op.apply(ScalarField::constant(op.grid(), 2.0)), kInfNorm) < 1e-12);
}

TEST_CASE("equal conductivities halve the elliptic eigenvalue") {
  const GridSpec g = torus2(16);
  const auto s = tensor2(1.5, 0.3, 0.7);
  const auto op = constant_operator(g, s, s);
  const auto f = mode2(g, 2, -3);
  const double a = measured_eigenvalue(op.intra(), f);
  CHECK(rel_diff(op.apply(f).values(), 0.5 * a * f.values()) < 1e-10);
}

TEST_CASE("distinct conductivities give the harmonic mean per mode") {
  const GridSpec g = torus2(16);
  const auto op = constant_operator(g, tensor2(2.0, 0.4, 0.5), tensor2(1.0, -0.2, 1.3));
  for (auto [kx, ky] : {std::pair{1, 0}, std::pair{3, 5}, std::pair{-7, 2}, std::pair{8, 8}}) {
    const auto f = mode2(g, kx, ky);
    const double ai = measured_eigenvalue(op.intra(), f);
    const double ae = measured_eigenvalue(op.extra(), f);
    CHECK(rel_diff(op.apply(f).values(), ai * ae / (ai + ae) * f.values()) < 1e-9);
  }
}

TEST_CASE("both operator forms agree") {
  const auto op = variable_operator(box2(10));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto f = random_field(op.grid(), seed, true);
    CHECK(rel_diff(op.apply_alternative(f).values(), op.apply(f).values()) < 1e-9);
  }
}

TEST_CASE("resolvent of a constant source") {
  const auto op = variable_operator(box2(9));
  for (Complex lambda : {Complex(1, 0), Complex(-3, 4), Complex(0.2, -50)}) {
    const auto sol = op.solve_resolvent(lambda, ScalarField::constant(op.grid(), 2.5));
    CHECK((sol.u.values().array() - 2.5 / lambda).abs().maxCoeff() < 1e-13);
    CHECK(discrete_norm(sol.u_e, kInfNorm) < 1e-13);
    CHECK((sol.u_i.values().array() - 2.5 / lambda).abs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("resolvent of a single torus mode") {
  const GridSpec g = torus2(16);
  const auto op = constant_operator(g, tensor2(2.0, 0.4, 0.5), tensor2(1.0, -0.2, 1.3));
  const auto f = mode2(g, 2, 1);
  const double ai = measured_eigenvalue(op.intra(), f);
  const double ae = measured_eigenvalue(op.extra(), f);
  const Complex lambda(3.0, -7.0);
  const auto sol = op.solve_resolvent(lambda, f);
  const VectorXcd u = f.values() / (lambda + ai * ae / (ai + ae));
  CHECK(rel_diff(sol.u.values(), u) < 1e-10);
  CHECK(rel_diff(sol.u_e.values(), -ai / (ai + ae) * u) < 1e-10);
}

TEST_CASE("resolvent triplet invariants and round trip") {
  for (auto method : {LinearSolverOptions::Method::direct, LinearSolverOptions::Method::iterative}) {
    LinearSolverOptions opts;
    opts.method = method;
    const auto op = variable_operator(box2(10), opts);
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const auto s = random_field(op.grid(), seed, true);
      for (Complex lambda : {Complex(1, 1), Complex(-10, 2), Complex(1e4, 0)}) {
        const auto sol = op.solve_resolvent(lambda, s);
        CHECK(rel_diff(sol.u.values(), sol.u_i.values() - sol.u_e.values()) < 1e-10);
        CHECK(mean_defect(sol.u_e) < 1e-10);
        CHECK(sol.residuals.operator_equation < 1e-9);
        CHECK(sol.residuals.parabolic < 1e-9);
        CHECK(sol.residuals.elliptic < 1e-9);
        const VectorXcd back = op.apply(sol.u).values() + lambda * sol.u.values();
        CHECK(weighted_norm(VectorXcd(back - s.values()), op.weights(), 2.0) <= 1e-9 * discrete_norm(s, 2.0));
      }
    }
  }
}

TEST_CASE("negative real lambda is on the cut") {
  const auto op = variable_operator(box2(6));
  const auto s = random_field(op.grid(), 1);
  CHECK_THROWS_AS(op.solve_resolvent(Complex(-2.0, 0.0), s), LambdaOnCut);
  CHECK_THROWS_AS(op.solve_resolvent(Complex(0.0, 0.0), s), LambdaOnCut);
  CHECK_NOTHROW(op.solve_resolvent(Complex(-2.0, 1e-3), s));
}

TEST_CASE("extracellular recovery") {
  const GridSpec g = box2(10);
  const auto sigma = fiber_sigma(g, 3.0, 0.3);
  const BidomainOperator equal(sigma, sigma);
  CHECK(discrete_norm(equal.recover_extracellular(ScalarField::constant(g, 3.0)), kInfNorm) < 1e-14);

  const auto u = random_field(g, 4);
  const auto ue = equal.recover_extracellular(u);
  CHECK(rel_diff(ue.values(), -0.5 * project_mean_zero(u).values()) < 1e-9);

  const auto si = random_field(g, 5);
  const auto se = ScalarField(g, -si.values());
  CHECK(rel_diff(equal.recover_extracellular(u, &si, &se).values(), ue.values()) < 1e-12);

  const auto bad = ScalarField(g, si.values() + VectorXcd::Constant(g.size(), 0.1));
  CHECK_THROWS_AS(equal.recover_extracellular(u, &bad, &se), CompatibilityViolation);
}

TEST_CASE("self-adjoint and nonnegative") {
  const auto op = variable_operator(box2(8));
  CHECK(op.adjoint_defect(50) <= 1e-9);
  CHECK(op.quadratic_form_minimum(50) >= -1e-9);
  const Eigen::MatrixXd m = op.weighted_matrix();
  const double dense_defect = (m - m.transpose()).norm() / m.norm();
  CHECK(dense_defect < 1e-12);
  const auto& spec = op.spectral_decomposition();
  CHECK(spec.eigenvalues[0] >= -1e-9);
  // Simple kernel: the constants.
  CHECK(spec.eigenvalues[1] > 1e-6);
  const VectorXd null = spec.eigenvectors.col(0).cwiseQuotient(spec.sqrt_weights);
  CHECK((null.array() - null.mean()).abs().maxCoeff() < 1e-8 * null.cwiseAbs().maxCoeff());
}

TEST_CASE("pseudo-resolvent identity and Abel limit") {
  const auto op = variable_operator(box2(10));
  const auto s = random_field(op.grid(), 7, true);
  const Complex lambda(1, 10), mu(5, -3);
  const VectorXcd rl = op.resolve(lambda, s).values();
  const VectorXcd rm = op.resolve(mu, s).values();
  const VectorXcd rlrm = op.resolve(lambda, ScalarField(op.grid(), rm)).values();
  const VectorXcd defect = rl - rm - (mu - lambda) * rlrm;
  CHECK(weighted_norm(defect, op.weights(), 2.0) <= 1e-8 * discrete_norm(s, 2.0));

  const auto smooth = ScalarField::sample(op.grid(), [](auto x) { return std::cos(pi * x[0]) * std::cos(pi * x[1]); });
  double prev = std::numeric_limits<double>::infinity();
  for (double lam : {1e1, 1e2, 1e3, 1e4}) {
    const VectorXcd diff = lam * op.resolve(lam, smooth).values() - smooth.values();
    const double e = weighted_norm(diff, op.weights(), 2.0);
    CHECK(e < prev);
    prev = e;
  }
  CHECK(prev < 1e-2);
}

TEST_CASE("real-axis resolvent bound") {
  const auto op = variable_operator(box2(7));
  const Eigen::MatrixXd s = op.weighted_matrix();
  for (double lam : {0.5, 3.0, 40.0}) {
    const Eigen::MatrixXd r = (s + lam * Eigen::MatrixXd::Identity(s.rows(), s.cols())).inverse();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(r);
    CHECK(svd.singularValues()[0] <= 1.0 / lam + 1e-9);
  }
}

TEST_CASE("fractional powers") {
  const auto op = variable_operator(box2(8));
  const auto f = random_field(op.grid(), 3);
  const double a = 1.0;

  SUBCASE("zero power is the identity") {
    const auto r = op.fractional_apply(0.0, a, f);
    CHECK(rel_diff(r.field.values(), f.values()) < 1e-15);
    CHECK(r.z_alpha_norm == doctest::Approx(discrete_norm(f, 2.0)).epsilon(1e-14));
  }
  SUBCASE("unit power is the shifted operator") {
    const VectorXcd expect = op.apply(f).values() + a * f.values();
    CHECK(rel_diff(op.fractional_apply(1.0, a, f).field.values(), expect) < 1e-9);
  }
  SUBCASE("half powers compose to the shifted operator and its resolvent") {
    const auto half = op.fractional_apply(0.5, a, f);
    const VectorXcd twice = op.fractional_apply(0.5, a, half.field).field.values();
    CHECK(rel_diff(twice, op.apply(f).values() + a * f.values()) < 1e-9);
    const auto neg = op.fractional_apply(0.5, a, f, PowerSign::negative);
    const VectorXcd inv = op.fractional_apply(0.5, a, neg.field, PowerSign::negative).field.values();
    CHECK(rel_diff(inv, op.resolve(a, f).values()) < 1e-9);
  }
  SUBCASE("moment inequality") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto g = random_field(op.grid(), seed);
      const double lhs = std::pow(op.fractional_apply(0.5, a, g).z_alpha_norm, 2);
      const double rhs = discrete_norm(g, 2.0) * op.fractional_apply(1.0, a, g).z_alpha_norm;
      CHECK(lhs <= rhs * (1 + 1e-8));
    }
  }
  SUBCASE("bad exponent or shift") {
    CHECK_THROWS_AS(op.fractional_apply(1.5, a, f), InvalidArgument);
    CHECK_THROWS_AS(op.fractional_apply(0.5, 0.0, f), InvalidArgument);
  }
}

TEST_CASE("negative fractional power matches the gamma integral") {
  const GridSpec g = torus1(10);
  const auto op = constant_operator(g, scalar_tensor(1, 1.0), scalar_tensor(1, 2.5));
  const Eigen::MatrixXd m = op.dense_matrix();
  const auto f = random_field(g, 8);
  const double alpha = 0.3, a = 2.0;
  const Eigen::MatrixXd shifted = m + a * Eigen::MatrixXd::Identity(m.rows(), m.cols());
  boost::math::quadrature::exp_sinh<double> integrator;
  VectorXd expect(g.size());
  for (Index j = 0; j < g.size(); ++j) {
    auto integrand = [&](double t) {
      if (t == 0.0) return 0.0;
      const Eigen::MatrixXd e = (-t * shifted).exp();
      return std::pow(t, alpha - 1) * e.row(j).dot(f.values().real());
    };
    expect[j] = integrator.integrate(integrand, 1e-12) / boost::math::tgamma(alpha);
  }
  const auto r = op.fractional_apply(alpha, a, f, PowerSign::negative);
  CHECK(rel_diff(r.field.values(), expect.cast<Complex>()) < 1e-8);
}

TEST_CASE("fractional power of a torus mode") {
  const GridSpec g = torus2(8);
  const auto op = constant_operator(g, tensor2(2.0, 0.4, 0.5), tensor2(1.0, -0.2, 1.3));
  const auto f = mode2(g, 1, 2);
  const double h = measured_eigenvalue(op.intra(), f) * measured_eigenvalue(op.extra(), f) /
                   (measured_eigenvalue(op.intra(), f) + measured_eigenvalue(op.extra(), f));
  CHECK(rel_diff(op.fractional_apply(0.5, 1.0, f).field.values(), std::sqrt(h + 1.0) * f.values()) < 1e-10);
}

TEST_CASE("dense work beyond the cap is refused") {
  LinearSolverOptions opts;
  opts.dense_cap = 50;
  const auto op = variable_operator(box2(9), opts);
  CHECK_THROWS_AS(op.dense_matrix(), TooLargeToAssemble);
  CHECK_THROWS_AS(op.fractional_apply(0.5, 1.0, random_field(op.grid(), 1)), TooLargeToAssemble);
}
