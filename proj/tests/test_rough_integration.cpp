#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "oracles.hpp"
#include "roughlab/errors.hpp"
#include "roughlab/gaussian_sim.hpp"
#include "roughlab/rough_integration.hpp"

using namespace roughlab;
using namespace roughlab::integration;

namespace {

IntegrandSpec scalar_integrand(double (*f)(double), double (*df)(double)) {
  return {[f](const Vec& x) { return Mat::Constant(1, 1, f(x[0])); },
          [df](const Vec& x) { return std::vector<Mat>{Mat::Constant(1, 1, df(x[0]))}; },
          {}};
}

double ident(double x) { return x; }
double one(double) { return 1.0; }
double sine(double x) { return std::sin(x); }
double cosine(double x) { return std::cos(x); }

RoughPathGrid bm_path(Eigen::Index d, std::size_t n, unsigned seed, double p = 2.2) {
  return lift_piecewise_linear(oracle::brownian(d, n, 1.0, seed), oracle::uniform_times(n, 1.0), ControlFn::hoelder(1.0, p));
}

VectorFieldSystem linear_system(double a) {
  VectorFieldSystem sys;
  sys.state_dim = 1;
  sys.drift = VectorField::zero(1);
  sys.driving = {VectorField::affine(Mat::Constant(1, 1, a), Vec::Zero(1))};
  return sys;
}

// Fitted decay rate (in halvings of the mesh) of the RMS difference between
// successive dyadic refinements, over seeds.
template <class Quantity>
double self_convergence_rate(Quantity&& q, int coarse, int fine, unsigned seeds) {
  std::vector<double> ms(static_cast<std::size_t>(fine - coarse), 0.0);
  for (unsigned s = 0; s < seeds; ++s) {
    const auto path = gaussian::lift_gaussian(gaussian::GaussianSpec::brownian(1, 1.0, std::size_t{1} << fine, s), 0);
    double prev = 0.0;
    for (int level = coarse; level <= fine; ++level) {
      const double v = q(path.coarsen(std::size_t{1} << (fine - level)));
      if (level > coarse) ms[static_cast<std::size_t>(level - coarse - 1)] += (v - prev) * (v - prev);
      prev = v;
    }
  }
  std::vector<double> x, y;
  for (std::size_t k = 0; k < ms.size(); ++k) {
    x.push_back(static_cast<double>(k));
    y.push_back(-0.5 * std::log2(ms[k] / seeds));
  }
  return oracle::slope(x, y);
}

}  // namespace

TEST_CASE("constant integrand gives c times the increment") {
  const auto path = bm_path(2, 256, 1);
  Mat c(3, 2);
  c << 1, 2, -1, 0.5, 0, 3;
  IntegrandSpec spec{[c](const Vec&) { return c; }, [](const Vec&) { return std::vector<Mat>(2, Mat::Zero(3, 2)); }, {}};
  const Vec got = rough_integral(spec, path, 10, 200);
  CHECK((got - c * (path.value(200) - path.value(10))).norm() <= 1e-12);
  CHECK(rough_integral(spec, path, 7, 7).norm() == 0.0);
}

TEST_CASE("int X dX = (X_t^2 - X_s^2)/2 on geometric lifts") {
  const auto spec = scalar_integrand(ident, one);
  for (unsigned s = 0; s < 8; ++s) {
    const auto path = bm_path(1, 1024, s);
    const double x0 = path.value(0)[0], xt = path.value(1024)[0];
    CHECK(std::abs(rough_integral(spec, path, 0, 1024)[0] - 0.5 * (xt * xt - x0 * x0)) <= 1e-8);
  }
}

TEST_CASE("additivity and linearity") {
  const auto path = bm_path(1, 512, 3);
  const auto f1 = scalar_integrand(sine, cosine);
  const auto f2 = scalar_integrand(ident, one);
  const Vec whole = rough_integral(f1, path, 20, 400);
  const Vec parts = rough_integral(f1, path, 20, 133) + rough_integral(f1, path, 133, 400);
  CHECK((whole - parts).norm() <= 1e-10);

  IntegrandSpec sum{[&](const Vec& x) { return Mat(f1.f(x) + f2.f(x)); },
                    [&](const Vec& x) {
                      auto a = f1.df(x);
                      a[0] += f2.df(x)[0];
                      return a;
                    },
                    {}};
  const Vec lin = rough_integral(f1, path, 0, 512) + rough_integral(f2, path, 0, 512);
  CHECK((rough_integral(sum, path, 0, 512) - lin).norm() <= 1e-12);

  const Mat running = integral_path(f1, path);
  CHECK(std::abs(running(0, 400) - running(0, 20) - whole[0]) <= 1e-12);
}

TEST_CASE("drift quadrature is left-point") {
  const auto path = bm_path(1, 64, 4);
  IntegrandSpec spec{[](const Vec&) { return Mat::Zero(1, 1); }, [](const Vec&) { return std::vector<Mat>{Mat::Zero(1, 1)}; },
                     [](const Vec& x) { return Vec::Constant(1, std::cos(x[0])); }};
  double ref = 0.0;
  for (std::size_t k = 0; k < 64; ++k) ref += std::cos(path.value(k)[0]) / 64.0;
  CHECK(rough_integral(spec, path, 0, 64)[0] == doctest::Approx(ref).epsilon(1e-14));
}

TEST_CASE("derivative consistency check") {
  const auto good = scalar_integrand(sine, cosine);
  const auto bad = scalar_integrand(sine, sine);
  std::vector<Vec> probes;
  for (double x : {-1.3, 0.0, 0.4, 2.2}) probes.push_back(Vec::Constant(1, x));
  CHECK(derivative_consistency(good, probes) <= 1e-5);
  CHECK(derivative_consistency(bad, probes) > 1e-2);
}

TEST_CASE("callback failures carry the step index") {
  const auto path = bm_path(1, 32, 5);
  int calls = 0;
  IntegrandSpec spec;
  spec.f = [&calls](const Vec&) -> Mat {
    if (++calls == 6) throw std::runtime_error("boom");
    return Mat::Constant(1, 1, 1.0);
  };
  try {
    rough_integral(spec, path, 0, 32);
    FAIL("expected CallbackError");
  } catch (const CallbackError& e) {
    CHECK(e.step() == 5);
    CHECK(std::string(e.what()).find("boom") != std::string::npos);
  }
}

TEST_CASE("refinements of the integral form a Cauchy sequence") {
  const auto spec = scalar_integrand(sine, cosine);
  const double rate = self_convergence_rate([&](const RoughPathGrid& p) { return rough_integral(spec, p, 0, p.num_steps())[0]; }, 6, 14, 256);
  MESSAGE("integral self-convergence rate " << rate);
  // first order in the mesh; an area-free sum would sit near 1/2
  CHECK(rate >= 0.9);
  CHECK(rate <= 1.2);
}

TEST_CASE("remainder_scan") {
  const auto path = bm_path(1, 1024, 6);
  IntegrandSpec constant{[](const Vec&) { return Mat::Constant(1, 1, 2.0); }, [](const Vec&) { return std::vector<Mat>{Mat::Zero(1, 1)}; }, {}};
  const std::vector<std::size_t> s{0, 100, 500};
  const std::vector<std::size_t> w{1, 4, 16, 64};
  const auto zero = remainder_scan(constant, path, s, w);
  REQUIRE(zero.rows.size() == 12);
  for (const auto& r : zero.rows) CHECK(r.remainder <= 1e-12);
  CHECK_FALSE(zero.slope.has_value());
  CHECK(zero.target_slope == doctest::Approx(2.0 / 2.2));

  const auto scan = remainder_scan(scalar_integrand(sine, cosine), path, s, w);
  REQUIRE(scan.slope.has_value());
  CHECK(*scan.slope > 0.5);
  for (const auto& r : scan.rows) CHECK(r.ratio == doctest::Approx(r.remainder / std::pow(r.omega, 2.0 / 2.2)));
  CHECK_THROWS_AS(remainder_scan(constant, path, s, std::vector<std::size_t>{600}), InvalidArgument);
  CHECK(remainder_csv(scan).rfind("s,t,omega,remainder,ratio\n", 0) == 0);
}

TEST_CASE("rde: trivial systems") {
  const auto path = bm_path(2, 128, 7);
  VectorFieldSystem sys;
  sys.state_dim = 3;
  sys.drift = VectorField::zero(3);
  sys.driving = {VectorField::zero(3), VectorField::zero(3)};
  const Vec y0 = Vec::LinSpaced(3, 1.0, 3.0);
  const auto still = rde_solve(sys, path, y0);
  for (Eigen::Index k = 0; k < still.states.cols(); ++k) CHECK(still.states.col(k) == y0);

  sys.drift = VectorField::constant(Vec::Constant(3, 0.7));
  const auto drift = rde_solve(sys, path, y0);
  CHECK((drift.states.rightCols(1) - (y0 + Vec::Constant(3, 0.7))).norm() <= 1e-13);
  const auto no_drift = rde_solve(sys, path, y0, RdeOptions{false, 1e8});
  CHECK(no_drift.states.rightCols(1) == y0);

  const auto jac = jacobian_rde(sys, path, y0);
  for (const auto& j : jac.forward) CHECK(j == Mat::Identity(3, 3));
  CHECK_THROWS_AS(rde_solve(sys, path, Vec::Zero(2)), InvalidArgument);
}

TEST_CASE("rde: exponential solution and Jacobian") {
  const auto sys = linear_system(1.0);
  std::vector<double> errs;
  for (unsigned s = 0; s < 16; ++s) {
    const auto path = gaussian::lift_gaussian(gaussian::GaussianSpec::brownian(1, 1.0, 1024, s), 0);
    const auto traj = jacobian_rde(sys, path, Vec::Constant(1, 2.0));
    const double exact = 2.0 * std::exp(path.value(1024)[0] - path.value(0)[0]);
    errs.push_back(std::abs(traj.states(0, 1024) / exact - 1.0));
    double inv = 0.0, jerr = 0.0;
    for (std::size_t k = 0; k <= 1024; ++k) {
      inv = std::max(inv, (traj.backward[k] * traj.forward[k] - Mat::Identity(1, 1)).norm());
      jerr = std::max(jerr, std::abs(traj.forward[k](0, 0) / std::exp(path.value(k)[0] - path.value(0)[0]) - 1.0));
    }
    CHECK(inv <= 1e-8);
    CHECK(jerr <= 1e-2);
  }
  CHECK(oracle::median(errs) <= 1e-3);
}

TEST_CASE("rde: flow property") {
  VectorFieldSystem sys;
  sys.state_dim = 2;
  VectorField v1, v2;
  v1.value = [](const Vec& y) { return Vec{{std::sin(y[1]), std::cos(y[0])}}; };
  v1.jacobian = [](const Vec& y) { return Mat{{0.0, std::cos(y[1])}, {-std::sin(y[0]), 0.0}}; };
  v2 = VectorField::affine(Mat{{0.1, -0.3}, {0.2, 0.0}}, Vec{{0.5, 0.0}});
  sys.driving = {v1, v2};
  sys.drift = VectorField::constant(Vec{{0.1, -0.2}});
  const auto path = bm_path(2, 256, 8);
  const Vec y0{{0.3, -0.4}};
  const auto whole = rde_solve(sys, path, y0);
  const auto first = rde_solve(sys, path.slice(0, 128), y0);
  const auto second = rde_solve(sys, path.slice(128, 256), first.states.rightCols(1));
  CHECK((whole.states.rightCols(1) - second.states.rightCols(1)).norm() <= 1e-10);

  const auto jac = jacobian_rde(sys, path, y0);
  double inv = 0.0;
  for (std::size_t k = 0; k <= 256; ++k) inv = std::max(inv, (jac.backward[k] * jac.forward[k] - Mat::Identity(2, 2)).norm());
  CHECK(inv <= 1e-8);
  CHECK((jac.states - whole.states).norm() == 0.0);
  CHECK(trajectory_csv(jac).rfind("t,y_1,y_2,j_11,j_12,j_21,j_22\n", 0) == 0);

  // Jacobian against finite differences of the flow
  const double h = 1e-6;
  for (int a = 0; a < 2; ++a) {
    Vec yp = y0, ym = y0;
    yp[a] += h;
    ym[a] -= h;
    const Vec fd = (rde_solve(sys, path, yp).states.rightCols(1) - rde_solve(sys, path, ym).states.rightCols(1)) / (2 * h);
    CHECK((fd - jac.forward.back().col(a)).norm() <= 1e-5 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("rde self-convergence order") {
  VectorFieldSystem sys;
  sys.state_dim = 1;
  sys.drift = VectorField::zero(1);
  VectorField v;
  v.value = [](const Vec& y) { return Vec::Constant(1, std::sin(y[0]) + 0.5); };
  v.jacobian = [](const Vec& y) { return Mat::Constant(1, 1, std::cos(y[0])); };
  sys.driving = {v};
  const double rate = self_convergence_rate(
      [&](const RoughPathGrid& p) { return rde_solve(sys, p, Vec::Constant(1, 0.3)).states(0, Eigen::last); }, 6, 14, 256);
  MESSAGE("rde self-convergence order " << rate);
  CHECK(rate >= 0.9);
  CHECK(rate <= 1.2);
}

TEST_CASE("rde: blow-up and conditioning flags") {
  Mat lin(1, 101);
  for (int i = 0; i <= 100; ++i) lin(0, i) = 20.0 * i / 100.0;
  const auto line = lift_piecewise_linear(lin, oracle::uniform_times(100, 1.0));

  VectorFieldSystem quad;
  quad.state_dim = 1;
  quad.drift = VectorField::zero(1);
  VectorField sq;
  sq.value = [](const Vec& y) { return Vec::Constant(1, y[0] * y[0]); };
  sq.jacobian = [](const Vec& y) { return Mat::Constant(1, 1, 2 * y[0]); };
  quad.driving = {sq};
  try {
    rde_solve(quad, line, Vec::Constant(1, 1.0));
    FAIL("expected blow-up");
  } catch (const BlowUpError& e) {
    CHECK(e.step() < 100);
  }

  VectorFieldSystem split;
  split.state_dim = 2;
  split.drift = VectorField::zero(2);
  split.driving = {VectorField::affine(Mat{{1.0, 0.0}, {0.0, -1.0}}, Vec::Zero(2))};
  const auto jac = jacobian_rde(split, line.dilate(0.8), Vec{{1.0, 1.0}});
  CHECK(jac.ill_conditioned);
  CHECK(jac.max_condition > kConditionWarning);
  const auto mild = jacobian_rde(split, bm_path(1, 64, 2), Vec{{1.0, 1.0}});
  CHECK_FALSE(mild.ill_conditioned);
}
