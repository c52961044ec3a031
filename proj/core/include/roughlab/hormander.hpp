#pragma once

// Hoermander-type non-degeneracy experiments for dY = V_0 dt + V dX.
//
// Bracket convention: [a, b](x) = Db(x) a(x) - Da(x) b(x).  Bracket words
// are generated from {V_1..V_d} by repeatedly bracketing with
// {V_0, V_1..V_d} on the right; V_0 only ever appears inside a bracket.
//
// The Gram matrix C_T = sum_k B_k B_k^T dt_k with B_k = J_{0<-t_k} V(Y_{t_k})
// is the left-point quadrature of int_0^T J V V^T J^T dt; a unit z lies in its
// kernel iff z^T J_{0<-t} V_k(Y_t) vanishes at every grid time.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "roughlab/rough_core.hpp"
#include "roughlab/rough_integration.hpp"

namespace roughlab::hormander {

using integration::Mat;
using integration::Vec;
using integration::VectorField;
using integration::VectorFieldSystem;

/// [a, b] with value Db a - Da b.  The Jacobian of the result is taken by
/// fourth-order central differences of its value.
VectorField lie_bracket(const VectorField& a, const VectorField& b);

struct BracketWord {
  std::string label;  // e.g. "[V1,V0]"
  int depth = 0;
  VectorField field;
};

/// Words up to `depth` bracket levels, level by level.
std::vector<BracketWord> bracket_words(const VectorFieldSystem& sys, int depth);

struct SpanningCheck {
  int depth = 0;
  Eigen::Index rank = 0;
  Eigen::Index state_dim = 0;
  std::vector<std::string> words;     // every generated word
  std::vector<std::string> basis;     // greedy subset realizing the rank
  Mat values;                         // e x words, evaluated at y0
  bool spans() const { return rank == state_dim; }
};

inline constexpr double kRankTolerance = 1e-10;
inline constexpr int kDefaultDepth = 3;

SpanningCheck bracket_spanning_check(const VectorFieldSystem& sys, const Vec& y0, int depth = kDefaultDepth);

struct System {
  std::string name;
  VectorFieldSystem fields;
  Vec y0;
};

/// ELLIPTIC, HYPO, DEGEN.
std::vector<std::string> known_systems();
/// Throws InvalidArgument listing the known names.
System shipped_system(const std::string& name);

/// Produces the driving rough path for a seed (e.g. a GaussianLifter).
using DriverFactory = std::function<RoughPathGrid(std::uint64_t)>;

struct SeedGram {
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;            // blow-up / callback message when !ok
  Mat gram;
  double min_eig = 0.0;
  Vec kernel_vector;            // eigenvector of min_eig
  double max_condition = 1.0;   // of J along the trajectory
  std::vector<double> residuals;  // filled by the iteration probe
  std::string verdict;            // nondegenerate | degenerate | failed
  std::vector<std::string> flags;
};

struct GramReport {
  std::string system;
  std::string driver;
  double horizon = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<SeedGram> per_seed;
  Eigen::Index bracket_rank = 0;
  std::vector<std::string> bracket_basis;
  int bracket_depth = kDefaultDepth;
  std::vector<std::string> notes;

  std::size_t failed_seeds() const;
  /// Minimum / maximum of min_eig over successful seeds (nan if none).
  double min_eig_low() const;
  double min_eig_high() const;
};

struct GramOptions {
  integration::RdeOptions rde;
  int bracket_depth = kDefaultDepth;
  /// Also run the residual cascade for each seed.
  bool residuals = false;
};

Mat gram_from_trajectory(const VectorFieldSystem& sys, const integration::JacobianTrajectory& traj);

/// Per-seed Gram matrices.  RDE failures mark the seed as failed and move on.
GramReport gram_matrix(const System& sys, const DriverFactory& driver, std::span<const std::uint64_t> seeds,
                       const GramOptions& options = {}, const std::string& driver_label = "");

struct IterationProbe {
  Vec z;                          // unit minimal eigenvector of C_T
  double min_eig = 0.0;
  /// sup_t max_{W at level l} |z^T J_{0<-t} W(Y_t)| for l = 0, 1, 2.
  std::vector<double> residuals;
  /// min over unit z of the level-0 sup, estimated over a direction sample
  /// (upper estimate) and bounded below by sqrt(min_eig / T).
  double level0_min = 0.0;
  double level0_lower_bound = 0.0;
};

IterationProbe hormander_iteration_probe(const System& sys, const RoughPathGrid& path,
                                         const integration::RdeOptions& rde = {}, std::size_t n_directions = 4096,
                                         std::uint64_t seed = 0);

struct DensityProbe {
  std::size_t samples = 0;
  std::size_t failed = 0;
  Vec mean;
  Mat covariance;
  Vec eigenvalues;  // ascending
  Eigen::Index rank = 0;
  bool collapsed = false;  // min eigenvalue < 1e-8 max (or all zero)
};

inline constexpr double kCollapseRatio = 1e-8;

/// Endpoint cloud of Y_T over n_seeds >= 100 consecutive seeds from `first_seed`.
DensityProbe density_probe(const System& sys, const DriverFactory& driver, std::size_t n_seeds,
                           std::uint64_t first_seed = 0, const integration::RdeOptions& rde = {});

std::string gram_report_json(const GramReport& report, int indent = 2);

}  // namespace roughlab::hormander
