#pragma once

// Level-2 rough paths on a finite time grid.
//
// A Level2Increment is an element (x, XX) of the truncated tensor algebra
// R^d + R^{d x d}: x is the path increment X_{s,t} and XX is the second
// level, the iterated integral  int_s^t X_{s,u} (x) dX_u.  Increments compose
// under Chen's relation
//
//     (x, XX) * (y, YY) = (x + y, XX + YY + x (x) y),
//
// which makes them a group with identity (0, 0) and inverse (-x, -XX + x (x) x).
// The encoding caps the level at 2; a level-3 extension would add a d^3 block.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace roughlab {

class Level2Increment {
 public:
  /// Identity element of dimension `dim`.
  explicit Level2Increment(Eigen::Index dim);
  /// Throws InvalidArgument on shape mismatch or non-finite entries.
  Level2Increment(Eigen::VectorXd first, Eigen::MatrixXd second);

  static Level2Increment identity(Eigen::Index dim) { return Level2Increment(dim); }

  Eigen::Index dim() const noexcept { return first_.size(); }
  const Eigen::VectorXd& first() const noexcept { return first_; }
  const Eigen::MatrixXd& second() const noexcept { return second_; }

  /// Level 1 scaled by lambda, level 2 by lambda^2 (the dilation).
  Level2Increment dilate(double lambda) const;

 private:
  Eigen::VectorXd first_;
  Eigen::MatrixXd second_;
};

Level2Increment chen_mul(const Level2Increment& a, const Level2Increment& b);
Level2Increment inverse(const Level2Increment& a);

/// Geometric lift of a straight segment: (dx, 1/2 dx (x) dx).
Level2Increment segment_lift(const Eigen::VectorXd& dx);

/// Frobenius norm of Sym(second) - 1/2 first (x) first.
double geometric_defect(const Level2Increment& a);

/// max(|x_a - x_b|, |XX_a - XX_b|_F) / max(1, |x_a|, |XX_a|_F).
double relative_distance(const Level2Increment& a, const Level2Increment& b);

/// Control function omega(s,t) together with the variation exponent p.
///
/// Hoelder kind: omega(s,t) = a (t - s).  Table kind: omega given on grid
/// node pairs (i, j), i <= j, as an (N+1) x (N+1) matrix (upper triangle used).
class ControlFn {
 public:
  enum class Kind { hoelder, p_var_table };

  static ControlFn hoelder(double scale = 1.0, double p = 2.5);
  static ControlFn p_var_table(Eigen::MatrixXd table, double p);

  Kind kind() const noexcept { return kind_; }
  double exponent_p() const noexcept { return p_; }
  double scale() const noexcept { return scale_; }
  const Eigen::MatrixXd& table() const noexcept { return table_; }

  /// omega between grid nodes i <= j.
  double operator()(std::span<const double> times, std::size_t i, std::size_t j) const;

  /// Same control with a different exponent.
  ControlFn with_exponent(double p) const;

  /// Largest violation of omega(i,j) + omega(j,k) <= omega(i,k) over all
  /// node triples (0 when superadditive), plus omega(i,i) and sign checks.
  double superadditivity_violation(std::span<const double> times) const;

 private:
  ControlFn(Kind kind, double scale, double p, Eigen::MatrixXd table);

  Kind kind_;
  double scale_;
  double p_;
  Eigen::MatrixXd table_;
};

/// Discrete level-2 rough path: node times t_0 < ... < t_N, the N
/// consecutive-node increments, a control and the start point X_{t_0}.
///
/// Steps are stored flat (level 1 as d x N, level 2 as d*d x N, column-major
/// d x d blocks) and running values X_{t_i} are precomputed.
class RoughPathGrid {
 public:
  RoughPathGrid(std::vector<double> times, const std::vector<Level2Increment>& steps,
                ControlFn control, Eigen::VectorXd start = Eigen::VectorXd());
  RoughPathGrid(std::vector<double> times, Eigen::MatrixXd step_first, Eigen::MatrixXd step_second,
                ControlFn control, Eigen::VectorXd start = Eigen::VectorXd());

  Eigen::Index dim() const noexcept { return first_.rows(); }
  std::size_t num_steps() const noexcept { return times_.size() - 1; }
  std::size_t num_nodes() const noexcept { return times_.size(); }
  const std::vector<double>& times() const noexcept { return times_; }
  double time(std::size_t i) const { return times_.at(i); }
  double horizon() const noexcept { return times_.back() - times_.front(); }
  const ControlFn& control() const noexcept { return control_; }
  double p() const noexcept { return control_.exponent_p(); }

  Level2Increment step(std::size_t k) const;
  /// Step k level 1 (node k -> k+1).
  Eigen::VectorXd step_first(std::size_t k) const { return first_.col(static_cast<Eigen::Index>(k)); }
  /// Step k level 2 as a d x d matrix.
  Eigen::MatrixXd step_second(std::size_t k) const;
  const Eigen::MatrixXd& first_matrix() const noexcept { return first_; }
  const Eigen::MatrixXd& second_matrix() const noexcept { return second_; }

  /// X_{t_i}.
  Eigen::VectorXd value(std::size_t i) const { return values_.col(static_cast<Eigen::Index>(i)); }
  /// d x (N+1) matrix of running values.
  const Eigen::MatrixXd& values() const noexcept { return values_; }
  const Eigen::VectorXd& start() const noexcept { return start_; }

  /// Chen composition of steps i..j-1; identity when i == j.
  Level2Increment increment(std::size_t i, std::size_t j) const;
  double omega(std::size_t i, std::size_t j) const;

  /// Sub-path on nodes i..j (control restricted accordingly).
  RoughPathGrid slice(std::size_t i, std::size_t j) const;
  /// Chen-compose consecutive blocks of `factor` steps.  N must be divisible.
  RoughPathGrid coarsen(std::size_t factor) const;
  /// Same data under a different control.
  RoughPathGrid with_control(ControlFn control) const;
  /// Dilation by lambda (level 1 times lambda, level 2 times lambda^2).
  RoughPathGrid dilate(double lambda) const;

 private:
  void validate_and_accumulate();

  std::vector<double> times_;
  Eigen::MatrixXd first_;
  Eigen::MatrixXd second_;
  ControlFn control_;
  Eigen::VectorXd start_;
  Eigen::MatrixXd values_;
};

/// Piecewise-linear geometric lift.  `samples` is d x (N+1), column i = X_{t_i}.
RoughPathGrid lift_piecewise_linear(const Eigen::MatrixXd& samples, std::vector<double> times,
                                    ControlFn control = ControlFn::hoelder());

/// Chen defect |increment(i,k) - increment(i,j) * increment(j,k)| (relative).
double chen_defect(const RoughPathGrid& path, std::size_t i, std::size_t j, std::size_t k);

/// Largest relative Chen defect over `max_triples` random node triples
/// (all triples when N is small enough).
double max_chen_defect(const RoughPathGrid& path, std::size_t max_triples = 2000,
                       std::uint64_t seed = 0);

/// Total increment via balanced pairwise composition of the steps; agrees
/// with the left fold `increment(0, N)` up to rounding.
Level2Increment tree_compose(const RoughPathGrid& path);

/// Fitted Hoelder exponent: least-squares slope of log max_i |X_{t_i, t_{i+2^k}}|
/// against log(2^k mesh) over dyadic spans.  nullopt when the path is
/// constant at some span (no finite logarithm).  Requires N >= 64.
std::optional<double> hoelder_exponent_fit(const RoughPathGrid& path);

/// p-variation control from the path's homogeneous norm
/// |x| + |XX|^{1/2}: omega(i,j) = sup over grid partitions of sum |.|^p.
/// O(N^3); intended for small grids.
ControlFn p_variation_control(const RoughPathGrid& path, double p);

/// CSV with header `t,x_1..x_d,xx_11..xx_dd`.  Row 0 holds t_0 and the
/// identity; row i >= 1 is the step from t_{i-1} to t_i.
void write_csv(std::ostream& out, const RoughPathGrid& path);
/// Parses and validates (finite, increasing times, identity row 0, Chen
/// consistency at 1e-10).  Throws IoError on malformed text.
RoughPathGrid read_csv(std::istream& in, ControlFn control = ControlFn::hoelder());

inline constexpr double kChenTolerance = 1e-10;

}  // namespace roughlab
