#pragma once

// True-roughness statistics of a sampled rough path.
//
// The pointwise condition  limsup_{t -> s} |<v, X_{s,t}>| / omega(s,t)^theta = +inf
// is probed at a finite ladder of dyadic window scales h_L = 2^{-L} T.  At
// each level the ratio is evaluated on a self-similar probe set
// t = s + k h_L / P, k = 1..P, so that for a self-similar driver the law of
// M_L scales exactly like h_L^{H - theta}; divergence shows up as a positive
// slope of log M_L against L log 2.  Using every grid node of the window
// instead (probes = 0) lets the finest lag dominate every level and hides the
// growth.
//
// The LIL statistic uses psi(h) = h^{1/(2 rho)} (ln ln 1/h)^{1/2} and every
// grid node of the window, so that deep windows still span many lag scales.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "roughlab/rough_core.hpp"

namespace roughlab::roughness {

struct RatioOptions {
  /// Exponent of omega in the denominator; 0 selects 2/p.
  double theta = 0.0;
  /// Probe nodes per window; 0 uses every grid node in the window.
  std::size_t probes = 4;
};

inline constexpr double kDivergingSlope = 0.05;
inline constexpr double kBoundedSlope = -0.05;

/// M_L(s, v): max over probe nodes t in (s, s + 2^{-L} T] of
/// |<v, X_{s,t}>| / omega(s,t)^theta, with 0/0 := 0.
double ratio_statistic(const RoughPathGrid& path, std::size_t s_index, const Eigen::VectorXd& v, int level,
                       const RatioOptions& options = {});

/// psi(h) = h^{1/(2 rho)} sqrt(ln ln(1/h)), defined for 0 < h < 1/e.
double psi(double h, double rho);

/// Psi_L(s, phi): max over all nodes t in (s, s + 2^{-L} T] of
/// |<phi, X_{s,t}>| / psi(t - s).  Throws when 2^{-L} T >= 1/e.
double lil_statistic(const RoughPathGrid& path, std::size_t s_index, const Eigen::VectorXd& phi, int level,
                     double rho);

struct DirectionScan {
  Eigen::VectorXd worst_direction;
  double worst_value = 0.0;
  double random_min = 0.0;       // min over the random directions
  double singular_value = 0.0;   // M_L along the smallest singular direction
  /// sigma_min(U) / sqrt(rows): no unit direction can score below this.
  double certified_lower_bound = 0.0;
  std::size_t rows = 0;
};

/// Directed search for the least rough direction at (s, L): random sphere
/// directions plus the smallest right-singular direction of the matrix U whose
/// rows are X_{s,t} / omega(s,t)^theta over the probe nodes.
DirectionScan direction_scan(const RoughPathGrid& path, std::size_t s_index, int level, std::size_t n_random,
                             std::uint64_t seed, const RatioOptions& options = {});

enum class Verdict { diverging, bounded, inconclusive };
std::string to_string(Verdict v);

struct ExponentFit {
  double slope = 0.0;
  Verdict verdict = Verdict::inconclusive;
  std::size_t used_levels = 0;
};

/// Least-squares slope of log M_L against L ln 2.  Levels with M_L = 0 are
/// skipped; an all-zero slice is "bounded" with slope -inf.  Needs at least
/// four levels with positive finite values otherwise.
ExponentFit exponent_fit(std::span<const int> levels, std::span<const double> values);

/// Dyadic levels 3 .. log2(N) - 2.
std::vector<int> default_levels(std::size_t steps);
/// `count` uniformly spaced interior nodes s such that the coarsest window
/// (s, s + 2^{-coarsest} T] stays inside the grid.
std::vector<std::size_t> default_s_points(const RoughPathGrid& path, std::size_t count, int coarsest_level);

struct ReportOptions {
  std::vector<int> levels;                // empty: default_levels
  std::vector<std::size_t> s_points;      // empty: default_s_points(count = s_count)
  std::size_t s_count = 16;
  std::size_t n_directions = 8;           // random unit directions (d = 1: just +1)
  std::size_t worst_direction_samples = 64;
  std::uint64_t seed = 0;
  RatioOptions ratio;
  /// Covariance exponent for psi; 0 skips the LIL table.
  double rho = 1.0;
};

struct RoughnessReport {
  double theta = 0.0;
  double rho = 0.0;
  double p = 0.0;
  std::size_t probes = 0;
  std::vector<double> s_points;               // base times
  std::vector<std::size_t> s_indices;
  std::vector<int> levels;
  std::vector<Eigen::VectorXd> directions;
  // [s][direction][level]
  std::vector<std::vector<std::vector<double>>> ratio_table;
  std::vector<std::vector<std::vector<std::optional<double>>>> lil_table;
  // [s][direction]
  std::vector<std::vector<double>> fitted_exponents;
  std::vector<std::vector<Verdict>> verdicts;
  // [s]: least rough direction per level, refit across levels
  std::vector<double> worst_exponents;
  std::vector<Verdict> worst_verdicts;
  /// Median deepest-level LIL statistic (the fitted level of Psi).
  std::optional<double> lil_level;

  double fraction(Verdict v) const;
  double median_exponent() const;
};

RoughnessReport roughness_report(const RoughPathGrid& path, const ReportOptions& options = {});

std::string report_json(const RoughnessReport& report, int indent = 2);
/// Rows `s,dir_id,level,ratio,lil,slope,verdict`.
std::string report_csv(const RoughnessReport& report);

// ---------------------------------------------------------- recovery

struct RecoveryOptions {
  std::size_t window = 32;
  bool with_drift = false;
  /// Degree of the local Taylor expansion of the unknown coefficient
  /// functions in X_{t_i, t_k}.  0 with second_level = false is the plain
  /// first-order fit against (X_{t_i,t}, t - t_i).
  int expansion_order = 4;
  bool second_level = true;
  double rank_tolerance = 1e-10;
};

struct RecoveryResult {
  std::vector<std::size_t> nodes;
  std::vector<Eigen::MatrixXd> f_hat;  // m x d per node
  std::vector<Eigen::VectorXd> g_hat;  // m per node (empty without drift)
  std::vector<double> condition;       // of the column-normalized design
  std::vector<bool> identifiable;
  std::size_t columns = 0;

  std::size_t unidentifiable_count() const;
};

/// Local least-squares recovery of the integrands of an observed path
/// A = int f(X) dX (+ int g(X) dt).  `output` is m x (N+1) on the path's
/// nodes.  The design models each step increment of A as
///     sum_mu z^mu [ a_mu . dX + (b_mu : XX) + c_mu dt ],   z = X_{t_i, t_k},
/// summed up to t, so a_0 = f(X_{t_i}) and c_0 = g(X_{t_i}).
RecoveryResult integrand_recovery(const Eigen::MatrixXd& output, const RoughPathGrid& path,
                                  const RecoveryOptions& options = {});

}  // namespace roughlab::roughness
