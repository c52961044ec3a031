#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "roughlab/errors.hpp"
#include "roughlab/gaussian_sim.hpp"
#include "roughlab/rough_integration.hpp"
#include "roughlab/rng.hpp"
#include "roughlab/roughness.hpp"

using namespace roughlab;
using namespace roughlab::roughness;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

RoughPathGrid line_path(std::size_t n, double p = 3.0, Eigen::Index d = 1) {
  MatrixXd x(d, static_cast<Eigen::Index>(n + 1));
  for (std::size_t i = 0; i <= n; ++i) x.col(static_cast<Eigen::Index>(i)).setConstant(static_cast<double>(i) / n);
  return lift_piecewise_linear(x, oracle::uniform_times(n, 1.0), ControlFn::hoelder(1.0, p));
}

RoughPathGrid fbm_path(double hurst, Eigen::Index d, std::size_t n, std::uint64_t seed, double p) {
  const auto spec = gaussian::GaussianSpec::fractional(hurst, d, 1.0, n, seed);
  return lift_piecewise_linear(gaussian::sample_path(spec), spec.times(), ControlFn::hoelder(1.0, p));
}

}  // namespace

TEST_CASE("ratio statistic: constant and linear paths") {
  const auto flat = lift_piecewise_linear(MatrixXd::Zero(1, 257), oracle::uniform_times(256, 1.0), ControlFn::hoelder(1.0, 3.0));
  const VectorXd e = VectorXd::Ones(1);
  for (int l = 0; l <= 6; ++l) CHECK(ratio_statistic(flat, 10, e, l) == 0.0);
  for (int l = 2; l <= 7; ++l) CHECK(lil_statistic(flat, 10, e, l, 1.0) == 0.0);

  const auto line = line_path(1024);
  for (std::size_t probes : {std::size_t{4}, std::size_t{0}}) {
    RatioOptions opt;
    opt.probes = probes;
    for (int l = 1; l <= 8; ++l) {
      const double h = std::ldexp(1.0, -l);
      CHECK(ratio_statistic(line, 0, e, l, opt) == doctest::Approx(std::cbrt(h)).epsilon(1e-12));
      CHECK(ratio_statistic(line, 100, e, l, opt) == doctest::Approx(std::cbrt(h)).epsilon(1e-12));
    }
  }
}

TEST_CASE("ratio statistic: preconditions") {
  const auto line = line_path(64);
  CHECK_THROWS_AS(ratio_statistic(line, 0, VectorXd::Constant(1, 2.0), 1), InvalidArgument);
  CHECK_THROWS_AS(ratio_statistic(line, 0, VectorXd::Ones(1), 6), InvalidArgument);  // one node per window
  CHECK_THROWS_AS(ratio_statistic(line, 64, VectorXd::Ones(1), 1), InvalidArgument);
  CHECK_NOTHROW(ratio_statistic(line, 0, VectorXd::Ones(1), 5));
}

TEST_CASE("psi and the LIL statistic domain") {
  CHECK(psi(std::exp(-std::exp(1.0)), 1.0) == doctest::Approx(std::exp(-std::exp(1.0) / 2)).epsilon(1e-14));
  CHECK(psi(std::exp(-std::exp(1.0)), 1.0) == doctest::Approx(0.256881).epsilon(1e-5));
  CHECK_THROWS_AS(psi(0.5, 1.0), InvalidArgument);
  const auto line = line_path(1024);
  CHECK_THROWS_AS(lil_statistic(line, 0, VectorXd::Ones(1), 1, 1.0), InvalidArgument);
  CHECK_NOTHROW(lil_statistic(line, 0, VectorXd::Ones(1), 2, 1.0));
}

TEST_CASE("symmetry, scaling and nestedness") {
  const auto path = fbm_path(0.4, 2, 1024, 3, 2.6);
  Engine g = make_engine(1);
  for (int k = 0; k < 10; ++k) {
    const VectorXd v = random_unit_vector(g, 2);
    const int level = 2 + k % 5;
    const double m = ratio_statistic(path, 37 * k, v, level);
    CHECK(ratio_statistic(path, 37 * k, -v, level) == m);
    CHECK(lil_statistic(path, 37 * k, -v, level, 1.25) == lil_statistic(path, 37 * k, v, level, 1.25));
    CHECK(ratio_statistic(path.dilate(2.5), 37 * k, v, level) == doctest::Approx(2.5 * m).epsilon(1e-12));
  }

  // coarse grid = every 4th node of the fine grid
  const auto coarse = path.coarsen(4);
  for (std::size_t probes : {std::size_t{4}, std::size_t{0}}) {
    RatioOptions opt;
    opt.probes = probes;
    for (int level = 2; level <= 5; ++level)
      for (std::size_t s : {0, 10, 60}) {
        const VectorXd v = random_unit_vector(g, 2);
        CHECK(ratio_statistic(path, 4 * s, v, level, opt) >= ratio_statistic(coarse, s, v, level, opt) * (1 - 1e-12));
      }
  }

  // superset of nodes: all-node statistic dominates the probe statistic
  RatioOptions all;
  all.probes = 0;
  for (int level = 2; level <= 6; ++level) {
    const VectorXd v = random_unit_vector(g, 2);
    CHECK(ratio_statistic(path, 5, v, level, all) >= ratio_statistic(path, 5, v, level));
  }
}

TEST_CASE("exponent_fit") {
  const std::vector<int> levels{3, 4, 5, 6, 7, 8};
  std::vector<double> power;
  for (int l : levels) power.push_back(std::exp2(-l / 3.0));
  const auto fit = exponent_fit(levels, power);
  CHECK(fit.slope == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK(fit.verdict == Verdict::bounded);

  const auto flat = exponent_fit(levels, std::vector<double>(6, 0.7));
  CHECK(std::abs(flat.slope) < 1e-12);
  CHECK(flat.verdict == Verdict::inconclusive);

  const auto zero = exponent_fit(levels, std::vector<double>(6, 0.0));
  CHECK(zero.verdict == Verdict::bounded);
  CHECK(std::isinf(zero.slope));

  std::vector<double> growing;
  for (int l : levels) growing.push_back(std::exp2(0.2 * l));
  CHECK(exponent_fit(levels, growing).verdict == Verdict::diverging);

  CHECK_THROWS_AS(exponent_fit(std::vector<int>{1, 2, 3}, std::vector<double>{1, 2, 3}), InvalidArgument);
  CHECK_THROWS_AS(exponent_fit(levels, std::vector<double>{1, 0, 0, 0, 1, 1}), InvalidArgument);
  CHECK(default_levels(4096) == std::vector<int>{3, 4, 5, 6, 7, 8, 9, 10});
}

TEST_CASE("direction_scan") {
  const auto path1 = fbm_path(0.4, 1, 512, 5, 2.6);
  const auto scan1 = direction_scan(path1, 30, 3, 16, 0);
  CHECK(scan1.worst_value == ratio_statistic(path1, 30, VectorXd::Ones(1), 3));

  // second component identically zero: the normal direction scores 0
  MatrixXd x = MatrixXd::Zero(2, 513);
  x.row(0) = gaussian::sample_path(gaussian::GaussianSpec::brownian(1, 1.0, 512, 4)).row(0);
  const auto plane = lift_piecewise_linear(x, oracle::uniform_times(512, 1.0), ControlFn::hoelder(1.0, 2.2));
  const auto scan = direction_scan(plane, 40, 3, 32, 1);
  CHECK(scan.worst_value == 0.0);
  CHECK(std::abs(scan.worst_direction[1]) == doctest::Approx(1.0));
  CHECK(scan.certified_lower_bound == 0.0);

  const auto rough = fbm_path(0.4, 2, 1024, 2, 2.6);
  for (int level = 3; level <= 7; ++level) {
    const auto s = direction_scan(rough, 100, level, 64, 3);
    CHECK(s.certified_lower_bound <= s.worst_value + 1e-14);
    CHECK(s.worst_value <= s.random_min);
  }

  ReportOptions opt;
  opt.s_count = 8;
  opt.n_directions = 4;
  const auto rep = roughness_report(plane, opt);
  for (Verdict v : rep.worst_verdicts) CHECK(v == Verdict::bounded);
}

TEST_CASE("worst-direction exponent on 2-d Brownian motion") {
  std::vector<double> slopes;
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    const auto spec = gaussian::GaussianSpec::brownian(2, 1.0, 4096, seed);
    const auto path = lift_piecewise_linear(gaussian::sample_path(spec), spec.times(), ControlFn::hoelder(1.0, 2.2));
    ReportOptions opt;
    opt.s_count = 4;
    opt.n_directions = 1;
    opt.rho = 0.0;
    const auto rep = roughness_report(path, opt);
    slopes.insert(slopes.end(), rep.worst_exponents.begin(), rep.worst_exponents.end());
  }
  const double m = oracle::median(slopes);
  MESSAGE("median worst-direction exponent " << m);
  CHECK(m == doctest::Approx(2.0 / 2.2 - 0.5).epsilon(0.15 / (2.0 / 2.2 - 0.5)));
}

TEST_CASE("report on the smooth driver is bounded everywhere") {
  const auto line = line_path(4096, 3.0, 2);
  ReportOptions opt;
  opt.n_directions = 8;
  const auto rep = roughness_report(line, opt);
  CHECK(rep.fraction(Verdict::bounded) == 1.0);
  CHECK(rep.theta == doctest::Approx(2.0 / 3.0));
  CHECK(rep.s_indices.size() == 16);
  CHECK(rep.levels == default_levels(4096));
  for (double s : rep.s_points) CHECK(s + std::ldexp(1.0, -3) <= 1.0);

  const auto j = nlohmann::json::parse(report_json(rep));
  CHECK(j["params"]["theta"].get<double>() == doctest::Approx(2.0 / 3.0));
  CHECK(j["ratio_table"].size() == 16);
  CHECK(j["ratio_table"][0].size() == 8);
  CHECK(j["ratio_table"][0][0].size() == rep.levels.size());
  CHECK(j["verdicts"][3][2] == "bounded");
  const std::string csv = report_csv(rep);
  CHECK(csv.rfind("s,dir_id,level,ratio,lil,slope,verdict\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 16 * 8 * static_cast<long>(rep.levels.size()));
}

TEST_CASE("fBM H = 0.3 diverges at rate theta - H") {
  std::vector<double> slopes;
  std::size_t diverging = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto rep = roughness_report(fbm_path(0.3, 2, 4096, seed, 3.0), ReportOptions{.seed = seed, .rho = 0.0});
    for (const auto& row : rep.fitted_exponents) slopes.insert(slopes.end(), row.begin(), row.end());
    for (const auto& row : rep.verdicts)
      for (Verdict v : row) {
        diverging += v == Verdict::diverging;
        ++total;
      }
  }
  CHECK(oracle::median(slopes) == doctest::Approx(2.0 / 3.0 - 0.3).epsilon(0.1 / (2.0 / 3.0 - 0.3)));
  CHECK(static_cast<double>(diverging) / total >= 0.9);
}

TEST_CASE("integrand recovery") {
  using namespace roughlab::integration;
  const auto path = fbm_path(0.4, 1, 1024, 7, 2.6);

  RecoveryOptions opt;
  opt.with_drift = true;
  const auto zero = integrand_recovery(MatrixXd::Zero(1, 1025), path, opt);
  REQUIRE(zero.nodes.size() == 1024 - 32 + 1);
  for (std::size_t k = 0; k < zero.nodes.size(); ++k) {
    CHECK(zero.f_hat[k].norm() == 0.0);
    CHECK(zero.g_hat[k].norm() == 0.0);
  }

  IntegrandSpec spec{[](const Vec& x) { return Mat::Constant(1, 1, std::sin(x[0])); },
                     [](const Vec& x) { return std::vector<Mat>{Mat::Constant(1, 1, std::cos(x[0]))}; },
                     [](const Vec& x) { return Vec::Constant(1, std::cos(x[0])); }};
  const auto rec = integrand_recovery(integral_path(spec, path), path, opt);
  double ferr = 0.0, gerr = 0.0;
  for (std::size_t k = 0; k < rec.nodes.size(); ++k) {
    const double x = path.value(rec.nodes[k])[0];
    ferr = std::max(ferr, std::abs(rec.f_hat[k](0, 0) - std::sin(x)));
    gerr = std::max(gerr, std::abs(rec.g_hat[k][0] - std::cos(x)));
  }
  CHECK(ferr <= 0.05);
  CHECK(gerr <= 0.05);
  CHECK(rec.unidentifiable_count() == 0);

  // smooth driver: A = int 1 dX - int 1 dt vanishes and dX, dt columns coincide
  const auto line = line_path(512);
  IntegrandSpec cancel{[](const Vec&) { return Mat::Constant(1, 1, 1.0); }, [](const Vec&) { return std::vector<Mat>{Mat::Zero(1, 1)}; },
                       [](const Vec&) { return Vec::Constant(1, -1.0); }};
  const MatrixXd a = integral_path(cancel, line);
  CHECK(a.cwiseAbs().maxCoeff() <= 1e-14);
  const auto flat = integrand_recovery(a, line, opt);
  CHECK(flat.unidentifiable_count() == flat.nodes.size());

  RecoveryOptions plain;
  plain.with_drift = true;
  plain.expansion_order = 0;
  plain.second_level = false;
  const auto simple = integrand_recovery(a, line, plain);
  CHECK(simple.columns == 2);
  CHECK(simple.unidentifiable_count() == simple.nodes.size());

  RecoveryOptions tiny = opt;
  tiny.window = 8;
  CHECK_THROWS_AS(integrand_recovery(a, line, tiny), InvalidArgument);
}
