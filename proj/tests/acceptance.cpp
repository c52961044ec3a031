// Acceptance run: one PASS/FAIL line per criterion A1..A9.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "roughlab/errors.hpp"
#include "roughlab/gaussian_sim.hpp"
#include "roughlab/hormander.hpp"
#include "roughlab/rng.hpp"
#include "roughlab/rough_core.hpp"
#include "roughlab/rough_integration.hpp"
#include "roughlab/roughness.hpp"

using namespace roughlab;
using integration::IntegrandSpec;
using integration::Mat;
using integration::Vec;
using integration::VectorField;
using integration::VectorFieldSystem;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(const char* id, bool pass, const std::string& detail) {
  std::printf("%s %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

RoughPathGrid lifted(const gaussian::GaussianSpec& spec, unsigned refine, double p) {
  return gaussian::lift_gaussian(spec, refine, ControlFn::hoelder(1.0, p));
}

RoughPathGrid line_path(Eigen::Index d, std::size_t n, double p) {
  Mat x(d, static_cast<Eigen::Index>(n + 1));
  for (std::size_t i = 0; i <= n; ++i) x.col(static_cast<Eigen::Index>(i)).setConstant(static_cast<double>(i) / n);
  return lift_piecewise_linear(x, oracle::uniform_times(n, 1.0), ControlFn::hoelder(1.0, p));
}

IntegrandSpec scalar_integrand(double (*f)(double), double (*df)(double)) {
  IntegrandSpec spec;
  spec.f = [f](const Vec& x) { return Mat::Constant(1, 1, f(x[0])); };
  spec.df = [df](const Vec& x) { return std::vector<Mat>{Mat::Constant(1, 1, df(x[0]))}; };
  return spec;
}

double sine(double x) { return std::sin(x); }
double cosine(double x) { return std::cos(x); }
double identity(double x) { return x; }
double one(double) { return 1.0; }

void a1() {
  const auto start = Clock::now();
  Engine g = make_engine(101);
  double assoc = 0.0, ident = 0.0, inv = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const Eigen::Index d = 1 + k % 4;
    auto draw = [&] {
      Mat second(d, d);
      second.reshaped() = standard_normal(g, d * d);
      return Level2Increment(standard_normal(g, d), second);
    };
    const auto a = draw(), b = draw(), c = draw();
    const auto e = Level2Increment::identity(d);
    assoc = std::max(assoc, relative_distance(chen_mul(chen_mul(a, b), c), chen_mul(a, chen_mul(b, c))));
    ident = std::max({ident, relative_distance(chen_mul(a, e), a), relative_distance(chen_mul(e, a), a)});
    inv = std::max({inv, relative_distance(chen_mul(a, inverse(a)), e), relative_distance(chen_mul(inverse(a), a), e)});
  }

  double chen = 0.0, pl_step_defect = 0.0, pl_increment_defect = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto path = lifted(gaussian::GaussianSpec::brownian(3, 1.0, 1024, seed), 4, 2.5);
    chen = std::max(chen, max_chen_defect(path, 2000, seed));
    const auto pl = lift_piecewise_linear(gaussian::sample_path(gaussian::GaussianSpec::brownian(3, 1.0, 1024, seed)),
                                          oracle::uniform_times(1024, 1.0));
    for (std::size_t k = 0; k < pl.num_steps(); ++k) pl_step_defect = std::max(pl_step_defect, geometric_defect(pl.step(k)));
    for (std::size_t j = 1; j <= pl.num_steps(); j *= 2) {
      const auto inc = pl.increment(0, j);
      pl_increment_defect = std::max(pl_increment_defect, geometric_defect(inc) / std::max(1.0, inc.second().norm()));
    }
  }
  const double secs = seconds_since(start);
  const double worst = std::max({assoc, ident, inv, chen, pl_increment_defect});
  report("A1", worst <= 1e-10 && pl_step_defect == 0.0 && secs < 10.0,
         fmt("assoc %.2e ident %.2e inverse %.2e grid-chen %.2e (10^4 triples each, tol 1e-10); "
             "pl step defect %.1e (exact 0), pl increment defect %.2e; %.1fs (< 10s)",
             assoc, ident, inv, chen, pl_step_defect, pl_increment_defect, secs));
}

void a2() {
  const auto ito_free = scalar_integrand(identity, one);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 32; ++seed) {
    const auto path = lifted(gaussian::GaussianSpec::brownian(1, 1.0, 1024, seed), 4, 2.5);
    const double x0 = path.value(0)[0], xt = path.value(path.num_steps())[0];
    const double got = integration::rough_integral(ito_free, path, 0, path.num_steps())[0];
    worst = std::max(worst, std::abs(got - 0.5 * (xt * xt - x0 * x0)));
  }
  Mat c(2, 2);
  c << 1.5, -2.0, 0.25, 3.0;
  IntegrandSpec constant;
  constant.f = [c](const Vec&) { return c; };
  constant.df = [](const Vec&) { return std::vector<Mat>(2, Mat::Zero(2, 2)); };
  double const_err = 0.0;
  for (std::uint64_t seed = 0; seed < 32; ++seed) {
    const auto path = lifted(gaussian::GaussianSpec::brownian(2, 1.0, 1024, seed), 2, 2.5);
    const Vec got = integration::rough_integral(constant, path, 0, path.num_steps());
    const_err = std::max(const_err, (got - c * (path.value(path.num_steps()) - path.value(0))).norm());
  }
  report("A2", worst <= 1e-8 && const_err <= 1e-12,
         fmt("max |int X dX - (X_T^2 - X_0^2)/2| = %.2e (tol 1e-8, BM N=1024, 32 seeds); constant integrand %.2e (tol 1e-12)",
             worst, const_err));
}

void a3() {
  const auto start = Clock::now();
  const auto spec = scalar_integrand(sine, cosine);
  std::vector<std::size_t> windows;
  for (std::size_t w = 1; w <= 256; w *= 2) windows.push_back(w);
  std::vector<std::size_t> s_points;
  for (std::size_t s = 0; s + 256 <= 4096; s += 64) s_points.push_back(s);

  auto median_slope = [&](const gaussian::GaussianSpec& base, double p) {
    gaussian::GaussianLifter lifter(base, 0, ControlFn::hoelder(1.0, p));
    std::vector<double> slopes;
    for (std::uint64_t seed = 0; seed < 32; ++seed) {
      const auto scan = integration::remainder_scan(spec, lifter(seed), s_points, windows);
      slopes.push_back(scan.slope.value_or(std::nan("")));
    }
    return oracle::median(slopes);
  };
  const double bm = median_slope(gaussian::GaussianSpec::brownian(1, 1.0, 4096), 2.2);
  const double fbm = median_slope(gaussian::GaussianSpec::fractional(0.35, 1, 1.0, 4096), 3.0);
  const double secs = seconds_since(start);
  const bool pass = std::abs(bm - 2.0 / 2.2) <= 0.2 && std::abs(fbm - 2.0 / 3.0) <= 0.2 && secs < 300.0;
  report("A3", pass,
         fmt("median remainder slope BM p=2.2: %.3f (target %.3f +- 0.2); fBM H=0.35 p=3: %.3f (target %.3f +- 0.2); "
             "32 seeds, N=4096; %.1fs (< 300s)",
             bm, 2.0 / 2.2, fbm, 2.0 / 3.0, secs));
}

void a4() {
  VectorFieldSystem lin;
  lin.state_dim = 1;
  lin.drift = VectorField::zero(1);
  lin.driving = {VectorField::affine(Mat::Identity(1, 1), Vec::Zero(1))};
  const double y0 = 1.3;
  std::vector<double> rel;
  double flow = 0.0;
  for (std::uint64_t seed = 0; seed < 32; ++seed) {
    const auto path = lifted(gaussian::GaussianSpec::brownian(1, 1.0, 1024, seed), 4, 2.5);
    const auto traj = integration::rde_solve(lin, path, Vec::Constant(1, y0));
    const double exact = y0 * std::exp(path.value(1024)[0] - path.value(0)[0]);
    rel.push_back(std::abs(traj.states(0, 1024) - exact) / std::abs(exact));
  }
  std::size_t within = 0;
  for (double r : rel) within += r <= 1e-3;
  const double med = oracle::median(rel);
  const double worst = *std::max_element(rel.begin(), rel.end());

  VectorFieldSystem sys;
  sys.state_dim = 2;
  sys.drift = VectorField::affine(Mat{{0.0, -0.2}, {0.2, 0.0}}, Vec::Zero(2));
  VectorField v1, v2;
  v1.value = [](const Vec& y) { return Vec{{std::sin(y[1]), 0.5 * std::cos(y[0])}}; };
  v1.jacobian = [](const Vec& y) { return Mat{{0.0, std::cos(y[1])}, {-0.5 * std::sin(y[0]), 0.0}}; };
  v2.value = [](const Vec& y) { return Vec{{0.3 * y[0], 1.0 + 0.2 * std::sin(y[0] * y[1])}}; };
  v2.jacobian = [](const Vec& y) {
    const double c = 0.2 * std::cos(y[0] * y[1]);
    return Mat{{0.3, 0.0}, {c * y[1], c * y[0]}};
  };
  sys.driving = {v1, v2};
  double inverse_err = 0.0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto path = lifted(gaussian::GaussianSpec::brownian(2, 1.0, 1024, seed), 4, 2.5);
    const Vec start{{0.4, -0.7}};
    const auto whole = integration::rde_solve(sys, path, start);
    for (std::size_t mid : {std::size_t{256}, std::size_t{700}}) {
      const auto second = integration::rde_solve(sys, path.slice(mid, 1024), whole.states.col(static_cast<Eigen::Index>(mid)));
      const Vec a = whole.states.col(1024), b = second.states.rightCols(1);
      flow = std::max(flow, (a - b).norm() / std::max(1.0, a.norm()));
    }
    const auto jac = integration::jacobian_rde(sys, path, start);
    for (std::size_t k = 0; k < jac.forward.size(); ++k)
      inverse_err = std::max(inverse_err, (jac.forward[k] * jac.backward[k] - Mat::Identity(2, 2)).norm());
  }
  report("A4", med <= 1e-3 && flow <= 1e-8 && inverse_err <= 1e-8,
         fmt("exponential solution rel err median %.2e, max %.2e, %zu/32 seeds <= 1e-3 (tol 1e-3 on the median, N=1024); "
             "flow property %.2e, |J J^-1 - I| %.2e (tol 1e-8)",
             med, worst, within, flow, inverse_err));
}

void a5() {
  const auto start = Clock::now();
  const double theta = 2.0 / 3.0, hurst = 0.3;
  gaussian::GaussianLifter lifter(gaussian::GaussianSpec::fractional(hurst, 2, 1.0, 4096), 0, ControlFn::hoelder(1.0, 3.0));
  std::size_t diverging = 0, total = 0;
  std::vector<double> slopes;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    roughness::ReportOptions opt;
    opt.s_count = 16;
    opt.n_directions = 8;
    opt.seed = seed;
    opt.ratio.theta = theta;
    opt.rho = 0.0;
    const auto rep = roughness::roughness_report(lifter(seed), opt);
    for (std::size_t s = 0; s < rep.verdicts.size(); ++s)
      for (std::size_t d = 0; d < rep.verdicts[s].size(); ++d) {
        diverging += rep.verdicts[s][d] == roughness::Verdict::diverging;
        ++total;
        slopes.push_back(rep.fitted_exponents[s][d]);
      }
  }
  const double frac = static_cast<double>(diverging) / static_cast<double>(total);
  const double med = oracle::median(slopes);

  roughness::ReportOptions smooth_opt;
  smooth_opt.s_count = 16;
  smooth_opt.n_directions = 8;
  smooth_opt.ratio.theta = theta;
  smooth_opt.rho = 0.0;
  const auto smooth = roughness::roughness_report(line_path(2, 4096, 3.0), smooth_opt);
  std::size_t bounded = 0, smooth_total = 0;
  for (const auto& row : smooth.verdicts)
    for (auto v : row) {
      bounded += v == roughness::Verdict::bounded;
      ++smooth_total;
    }
  const double secs = seconds_since(start);
  report("A5", frac >= 0.9 && std::abs(med - (theta - hurst)) <= 0.1 && bounded == smooth_total && secs < 600.0,
         fmt("fBM H=0.3 theta=2/3: %zu/%zu = %.1f%% diverging (>= 90%%), median exponent %.3f (target %.3f +- 0.1); "
             "x_t=t: %zu/%zu bounded (100%%); %.1fs (< 600s)",
             diverging, total, 100.0 * frac, med, theta - hurst, bounded, smooth_total, secs));
}

void a6() {
  gaussian::GaussianLifter lifter(gaussian::GaussianSpec::brownian(1, 1.0, std::size_t{1} << 16), 0, ControlFn::hoelder(1.0, 2.2));
  std::vector<double> levels;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    roughness::ReportOptions opt;
    opt.levels = {3, 4, 5, 6, 7, 8};
    opt.s_count = 16;
    opt.seed = seed;
    opt.rho = 1.0;
    const auto rep = roughness::roughness_report(lifter(seed), opt);
    levels.push_back(rep.lil_level.value_or(std::nan("")));
  }
  const double med = oracle::median(levels);
  report("A6", med >= 1.0 && med <= 1.6,
         fmt("BM rho=1 deepest-level LIL statistic median %.3f over 64 seeds (band [1.0, 1.6], sqrt2 = %.3f; N=2^16, levels 3..8)",
             med, std::sqrt(2.0)));
}

void a7() {
  const auto start = Clock::now();
  gaussian::GaussianLifter lifter(gaussian::GaussianSpec::brownian(1, 1.0, 1024), 2, ControlFn::hoelder(1.0, 2.5));
  const hormander::DriverFactory driver = [&lifter](std::uint64_t seed) { return lifter(seed); };
  std::vector<std::uint64_t> seeds(100);
  for (std::size_t k = 0; k < seeds.size(); ++k) seeds[k] = k;

  const auto hypo = hormander::gram_matrix(hormander::shipped_system("HYPO"), driver, seeds, {}, "bm");
  const bool hypo_ok = hypo.failed_seeds() == 0 && hypo.min_eig_low() > 1e-4 && hypo.bracket_rank == 2;

  const auto degen_sys = hormander::shipped_system("DEGEN");
  const auto degen = hormander::gram_matrix(degen_sys, driver, seeds, {}, "bm");
  double worst_angle = 0.0;
  for (const auto& g : degen.per_seed) {
    if (!g.ok) continue;
    worst_angle = std::max(worst_angle, std::acos(std::min(1.0, std::abs(g.kernel_vector[1]) / g.kernel_vector.norm())));
  }
  const auto density = hormander::density_probe(degen_sys, driver, 100);
  const bool degen_ok = degen.failed_seeds() == 0 && degen.min_eig_high() <= 1e-10 && worst_angle <= 1e-4 && density.collapsed;
  const double secs = seconds_since(start);
  report("A7", hypo_ok && degen_ok && secs < 600.0,
         fmt("HYPO min_eig over 100 seeds %.3e (> 1e-4), bracket rank %ld (= 2); DEGEN max min_eig %.2e (<= 1e-10), "
             "kernel angle to (0,1) %.1e (<= 1e-4), density collapsed %s (rank %ld); %.1fs (< 600s)",
             hypo.min_eig_low(), static_cast<long>(hypo.bracket_rank), degen.min_eig_high(), worst_angle,
             density.collapsed ? "yes" : "no", static_cast<long>(density.rank), secs));
}

void a8() {
  IntegrandSpec spec = scalar_integrand(sine, cosine);
  spec.g = [](const Vec& x) { return Vec::Constant(1, std::cos(x[0])); };
  roughness::RecoveryOptions opt;
  opt.with_drift = true;
  gaussian::GaussianLifter lifter(gaussian::GaussianSpec::fractional(0.4, 1, 1.0, 4096), 0, ControlFn::hoelder(1.0, 2.6));
  double f_err = 0.0, g_err = 0.0;
  std::size_t unidentified = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto path = lifter(seed);
    const auto rec = roughness::integrand_recovery(integration::integral_path(spec, path), path, opt);
    unidentified += rec.unidentifiable_count();
    for (std::size_t i = 0; i < rec.nodes.size(); ++i) {
      const double x = path.value(rec.nodes[i])[0];
      f_err = std::max(f_err, std::abs(rec.f_hat[i](0, 0) - std::sin(x)));
      g_err = std::max(g_err, std::abs(rec.g_hat[i][0] - std::cos(x)));
    }
  }
  const auto line = line_path(1, 4096, 2.6);
  const auto flat = roughness::integrand_recovery(integration::integral_path(spec, line), line, opt);
  const bool all_flagged = flat.unidentifiable_count() == flat.nodes.size() && !flat.nodes.empty();
  report("A8", f_err <= 0.05 && g_err <= 0.05 && unidentified == 0 && all_flagged,
         fmt("fBM H=0.4 N=4096, 8 seeds: sup |f_hat - sin| %.2e, sup |g_hat - cos| %.2e (tol 0.05), %zu unidentifiable nodes; "
             "x_t=t: %zu/%zu nodes flagged unidentifiable",
             f_err, g_err, unidentified, flat.unidentifiable_count(), flat.nodes.size()));
}

void a9() {
  const auto lam = gaussian::eigenvalue_family(gaussian::EigenFamily::geometric, 0.5, 8);
  Engine g = make_engine(909);
  double identity_err = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const Vec phi = random_unit_vector(g, 8);
    Vec psi = standard_normal(g, 8);
    psi -= psi.dot(phi) * phi;
    psi.normalize();
    const double a = std::cos(0.37 * k), b = std::sin(0.37 * k);
    double cross = 0.0;
    for (int i = 0; i < 8; ++i) cross += lam[static_cast<std::size_t>(i)] * phi[i] * psi[i];
    const double expanded = a * a * gaussian::qwiener_sigma(lam, phi) + b * b * gaussian::qwiener_sigma(lam, psi) + 2 * a * b * cross;
    identity_err = std::max(identity_err, std::abs(gaussian::qwiener_sigma(lam, (a * phi + b * psi).normalized()) - expanded));
  }
  const double lam_min = *std::min_element(lam.begin(), lam.end());
  double brute = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 10000; ++k) brute = std::min(brute, gaussian::qwiener_sigma(lam, random_unit_vector(g, 8)));
  const double gap = brute / lam_min - 1.0;
  report("A9", identity_err <= 1e-12 && brute >= lam_min && gap <= 0.05,
         fmt("quadratic-form identity %.2e (tol 1e-12); min sigma^2 over 10^4 uniform directions %.4e vs min lambda %.4e "
             "(ratio - 1 = %.3f, tol 0.05)",
             identity_err, brute, lam_min, gap));
}

}  // namespace

int main() {
  const auto start = Clock::now();
  for (auto criterion : {a1, a2, a3, a4, a5, a6, a7, a8, a9}) {
    try {
      criterion();
    } catch (const std::exception& e) {
      std::printf("FAIL  exception: %s\n", e.what());
      ++failures;
    }
  }
  std::printf("%d criteria failed; total %.1fs\n", failures, seconds_since(start));
  return failures == 0 ? 0 : 1;
}
