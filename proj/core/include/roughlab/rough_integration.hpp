#pragma once

// Rough integration against a level-2 path and a level-2 Euler RDE solver.
//
// Conventions: a one-form f maps x in R^d to an m x d matrix; its derivative
// is a vector Df of d matrices, Df[j] = d f / d x_j.  The compensated sum
// over a step with increment (x, XX) is
//
//     f(X_s) x + sum_{j,k} Df[j](X_s)(:, k) XX(j, k).
//
// Callbacks must be reentrant: independent integrals may run concurrently.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "roughlab/rough_core.hpp"

namespace roughlab::integration {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct IntegrandSpec {
  std::function<Mat(const Vec&)> f;
  std::function<std::vector<Mat>(const Vec&)> df;
  /// Optional drift integrand g: R^d -> R^m, integrated against dt.
  std::function<Vec(const Vec&)> g;
};

/// Largest relative disagreement between Df and central differences of f at
/// the given probes (step `h`).  Relative to max(1, |Df|).
double derivative_consistency(const IntegrandSpec& spec, std::span<const Vec> probes, double h = 1e-4);

/// Compensated Riemann sum over steps i..j-1 plus left-point drift quadrature.
Vec rough_integral(const IntegrandSpec& spec, const RoughPathGrid& path, std::size_t i, std::size_t j);

/// Running integral A_{t_k} = int_{t_0}^{t_k}, as an m x (N+1) matrix.
Mat integral_path(const IntegrandSpec& spec, const RoughPathGrid& path);

struct RemainderRow {
  std::size_t s_index = 0;
  std::size_t t_index = 0;
  double s = 0.0;
  double t = 0.0;
  double omega = 0.0;
  double remainder = 0.0;  // |int_s^t f(X) dX - f(X_s) X_{s,t}|
  double ratio = 0.0;      // remainder / omega^{2/p}
};

struct RemainderScan {
  std::vector<RemainderRow> rows;
  /// Least-squares slope of log(mean_s remainder) against log(t - s) over the
  /// window lengths; nullopt when fewer than two windows have a positive mean.
  std::optional<double> slope;
  double target_slope = 0.0;  // 2/p
};

/// Scans the basic-estimate remainder; windows are lengths in steps.
RemainderScan remainder_scan(const IntegrandSpec& spec, const RoughPathGrid& path,
                             std::span<const std::size_t> s_indices, std::span<const std::size_t> windows);

/// A vector field on R^e with its Jacobian.  `second`, if set, returns the
/// directional second derivative D^2V(y)[w] (an e x e matrix); otherwise it
/// is approximated by central differences of `jacobian`.
struct VectorField {
  std::function<Vec(const Vec&)> value;
  std::function<Mat(const Vec&)> jacobian;
  std::function<Mat(const Vec&, const Vec&)> second;

  static VectorField zero(Eigen::Index e);
  static VectorField constant(Vec c);
  /// y -> A y + b.
  static VectorField affine(Mat a, Vec b);

  Mat second_derivative(const Vec& y, const Vec& w) const;
};

/// dY = V_0(Y) dt + sum_k V_k(Y) dX^k on R^e.
struct VectorFieldSystem {
  Eigen::Index state_dim = 0;
  VectorField drift;
  std::vector<VectorField> driving;

  Eigen::Index driver_dim() const { return static_cast<Eigen::Index>(driving.size()); }
  /// e x d matrix with columns V_k(y).
  Mat driving_matrix(const Vec& y) const;
};

struct RdeOptions {
  bool with_drift = true;
  double explosion_guard = 1e8;
};

struct Trajectory {
  std::vector<double> times;
  Mat states;  // e x (N+1)
};

/// Level-2 Euler step  Y += V(Y) x + sum_{j,k} DV_k V_j XX(j,k) + V_0(Y) dt.
Trajectory rde_solve(const VectorFieldSystem& sys, const RoughPathGrid& path, const Vec& y0,
                     const RdeOptions& options = {});

struct JacobianTrajectory {
  std::vector<double> times;
  Mat states;                 // e x (N+1)
  std::vector<Mat> forward;   // J_{t<-0}
  std::vector<Mat> backward;  // J_{0<-t}
  double max_condition = 1.0;
  bool ill_conditioned = false;  // condition number above 1e12 somewhere
};

/// Solves the RDE together with its linearized flow.  J_{0<-t} is obtained
/// by a QR solve against J_{t<-0}.
JacobianTrajectory jacobian_rde(const VectorFieldSystem& sys, const RoughPathGrid& path, const Vec& y0,
                                const RdeOptions& options = {});

inline constexpr double kConditionWarning = 1e12;

/// `t,y_1..y_e`.
std::string trajectory_csv(const Trajectory& traj);
/// `t,y_1..y_e` followed by J_{t<-0} entries row-major (`j_11..j_ee`).
std::string trajectory_csv(const JacobianTrajectory& traj);
/// `s,t,omega,remainder,ratio`.
std::string remainder_csv(const RemainderScan& scan);

}  // namespace roughlab::integration
