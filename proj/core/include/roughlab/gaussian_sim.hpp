#pragma once

// Gaussian drivers: Brownian motion, fractional Brownian motion and
// finite-mode Q-Wiener processes, sampled exactly in law on a uniform grid and
// lifted to geometric level-2 rough paths.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "roughlab/rough_core.hpp"

namespace roughlab::gaussian {

enum class DriverKind { bm, fbm, qwiener };

/// Closed-form eigenvalue families for Q-Wiener truncations.
/// power:     lambda_k = k^{-a}, a > 1
/// geometric: lambda_k = r^k,    0 < r < 1
enum class EigenFamily { none, power, geometric };

struct GaussianSpec {
  DriverKind kind = DriverKind::bm;
  double hurst = 0.5;
  /// Independent components for bm/fbm.  Ignored for qwiener (K = lambdas.size()).
  Eigen::Index dim = 1;
  std::vector<double> lambdas;
  EigenFamily family = EigenFamily::none;
  double family_param = 0.0;
  double horizon = 1.0;
  std::size_t steps = 1024;
  std::uint64_t seed = 0;
  unsigned refine = 6;

  static GaussianSpec brownian(Eigen::Index dim, double horizon, std::size_t steps, std::uint64_t seed = 0);
  static GaussianSpec fractional(double hurst, Eigen::Index dim, double horizon, std::size_t steps,
                                 std::uint64_t seed = 0);
  static GaussianSpec q_wiener(std::vector<double> lambdas, double horizon, std::size_t steps,
                               std::uint64_t seed = 0);
  /// Q-Wiener with the first K eigenvalues of a closed-form family.
  static GaussianSpec q_wiener(EigenFamily family, double param, std::size_t modes, double horizon,
                               std::size_t steps, std::uint64_t seed = 0);

  Eigen::Index components() const;
  /// Covariance variation exponent: 1/(2H) for fBM, 1 otherwise.
  double rho() const;
  std::vector<double> times() const;
  /// Throws InvalidArgument naming the offending parameter.
  void validate() const;
};

std::string to_string(DriverKind kind);

/// Suggested variation exponent p > 2 rho.
double default_p(const GaussianSpec& spec);

std::vector<double> eigenvalue_family(EigenFamily family, double param, std::size_t modes);
/// sum_{k > K} lambda_k for closed-form families; nullopt otherwise.
std::optional<double> qwiener_tail_mass(const GaussianSpec& spec);

/// 1/2 (s^{2H} + t^{2H} - |t - s|^{2H}).
double fbm_covariance(double hurst, double s, double t);

/// Covariance of one scalar component; component k of a Q-Wiener process is
/// component_scale[k] * base.
struct CovarianceGrid {
  std::vector<double> times;
  Eigen::MatrixXd base;
  std::vector<double> component_scale;
};

CovarianceGrid covariance_grid(const GaussianSpec& spec);

enum class SamplingMethod { automatic, cholesky, circulant };

/// Exact-in-law sampler for one spec.  The covariance factor is computed
/// once at construction; `sample` is then a pure function of the seed and
/// is safe to call concurrently.
class PathSampler {
 public:
  explicit PathSampler(const GaussianSpec& spec, SamplingMethod method = SamplingMethod::automatic);

  const GaussianSpec& spec() const noexcept { return spec_; }
  SamplingMethod method() const noexcept { return method_; }

  /// components x (N+1) matrix, column 0 = 0.  Component k draws from RNG
  /// stream k of `seed`.
  Eigen::MatrixXd sample(std::uint64_t seed) const;

  /// Jitter added to the covariance diagonal during factorization (0 if none).
  double jitter() const noexcept { return jitter_; }

 private:
  Eigen::VectorXd scalar_path(std::uint64_t seed, std::uint64_t stream) const;

  GaussianSpec spec_;
  SamplingMethod method_;
  double jitter_ = 0.0;
  Eigen::MatrixXd chol_;               // lower factor over nodes 1..N (cholesky)
  Eigen::VectorXd circulant_sqrt_eig_; // sqrt(eig / m) of the embedding (circulant)
};

/// One sample on the grid and seed carried by `spec`.
Eigen::MatrixXd sample_path(const GaussianSpec& spec);

/// Refine-then-coarsen lifter: samples on the grid with mesh 2^{-refine}
/// times the requested mesh, lifts piecewise-linearly there and
/// Chen-composes back onto the requested grid.
class GaussianLifter {
 public:
  GaussianLifter(const GaussianSpec& spec, unsigned refine, ControlFn control);
  GaussianLifter(const GaussianSpec& spec, unsigned refine);

  RoughPathGrid operator()(std::uint64_t seed) const;
  const GaussianSpec& spec() const noexcept { return spec_; }
  unsigned refine() const noexcept { return refine_; }

 private:
  GaussianSpec spec_;
  unsigned refine_;
  ControlFn control_;
  PathSampler fine_;
};

RoughPathGrid lift_gaussian(const GaussianSpec& spec, unsigned refine, ControlFn control);
RoughPathGrid lift_gaussian(const GaussianSpec& spec, unsigned refine);

/// sigma_phi^2 = sum_k lambda_k phi_k^2 for a unit dual vector phi.
double qwiener_sigma(std::span<const double> lambdas, const Eigen::VectorXd& phi);

struct RhoVariation {
  std::vector<std::size_t> strides;  // node stride per dyadic level, coarse to fine
  std::vector<double> per_level;     // (sum |rect|^rho)^{1/rho} on that partition
  std::vector<double> running_sup;   // nondecreasing
  double estimate = 0.0;             // running_sup.back(); a lower bound of the 2D rho-variation
};

/// Dyadic lower-bound estimator of the 2D rho-variation of the base covariance.
RhoVariation rho_var_2d(const CovarianceGrid& cov, double rho);

struct MomentProbeRow {
  std::size_t s_index = 0;
  std::size_t t_index = 0;
  double eta = 0.0;
  double estimate = 0.0;       // Monte Carlo mean of exp(eta |X_{s,t}|^2 / |t-s|^{1/rho})
  double std_error = 0.0;
  double pole_ratio = 0.0;     // 2 eta max_k sigma_k^2, sigma_k^2 from the same samples
  bool diverging = false;
};

struct MomentProbeOptions {
  std::size_t samples = 10000;
  double overflow_guard = 1e12;
  /// Standard errors of the variance estimate subtracted from 1 before the pole test.
  double pole_slack_sigmas = 4.0;
};

/// Monte Carlo estimate of E exp(eta |X_{s,t}|^2 / |t - s|^{1/rho}) on the
/// (pairs x etas) grid.  Flags divergence when the estimate exceeds the
/// overflow guard or when the Gaussian plug-in pole test triggers
/// (the MGF of a centred Gaussian square is infinite once 2 eta sigma^2 >= 1).
std::vector<MomentProbeRow> moment_condition_probe(const GaussianSpec& spec, std::span<const double> etas,
                                                   std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                                   const MomentProbeOptions& options = {});

}  // namespace roughlab::gaussian
