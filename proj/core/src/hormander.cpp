#include "roughlab/hormander.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "parallel.hpp"
#include "roughlab/errors.hpp"
#include "roughlab/rng.hpp"

namespace roughlab::hormander {

namespace {

Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& y) {
  const Vec f0 = f(y);
  Mat jac(f0.size(), y.size());
  const double h = 1e-3 * (1.0 + y.lpNorm<Eigen::Infinity>());
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    Vec p1 = y, p2 = y, m1 = y, m2 = y;
    p1[k] += h;
    p2[k] += 2 * h;
    m1[k] -= h;
    m2[k] -= 2 * h;
    jac.col(k) = (8.0 * (f(p1) - f(m1)) - (f(p2) - f(m2))) / (12.0 * h);
  }
  return jac;
}

bool present(const VectorField& v) { return static_cast<bool>(v.value); }

Eigen::Index numerical_rank(const Mat& m) {
  if (m.cols() == 0 || m.rows() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& sv = svd.singularValues();
  if (sv(0) <= 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k) r += sv(k) > kRankTolerance * sv(0);
  return r;
}

// Unit vector with its largest-magnitude component positive.
Vec canonical_sign(Vec v) {
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  return v[k] < 0 ? Vec(-v) : v;
}

// Columns J_{0<-t_k} V(Y_{t_k}) for every node, stacked as e x (d * nodes).
Mat transported_fields(const VectorFieldSystem& sys, const integration::JacobianTrajectory& traj,
                       std::size_t nodes) {
  const Eigen::Index d = sys.driver_dim();
  Mat out(sys.state_dim, d * static_cast<Eigen::Index>(nodes));
  for (std::size_t k = 0; k < nodes; ++k)
    out.middleCols(d * static_cast<Eigen::Index>(k), d) =
        traj.backward[k] * sys.driving_matrix(traj.states.col(static_cast<Eigen::Index>(k)));
  return out;
}

std::vector<double> residual_cascade(const std::vector<BracketWord>& words,
                                     const integration::JacobianTrajectory& traj, const Vec& z) {
  std::vector<double> res(3, 0.0);
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const Vec zt = traj.backward[k].transpose() * z;
    const Vec y = traj.states.col(static_cast<Eigen::Index>(k));
    for (const auto& w : words) {
      if (w.depth > 2) continue;
      const auto l = static_cast<std::size_t>(w.depth);
      res[l] = std::max(res[l], std::abs(zt.dot(w.field.value(y))));
    }
  }
  return res;
}

std::pair<double, Vec> smallest_eigenpair(const Mat& c) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(c);
  return {eig.eigenvalues()(0), canonical_sign(eig.eigenvectors().col(0))};
}

}  // namespace

VectorField lie_bracket(const VectorField& a, const VectorField& b) {
  if (!a.value || !a.jacobian || !b.value || !b.jacobian)
    throw InvalidArgument("lie_bracket needs value and jacobian callbacks on both fields");
  auto pa = std::make_shared<VectorField>(a);
  auto pb = std::make_shared<VectorField>(b);
  VectorField out;
  out.value = [pa, pb](const Vec& y) -> Vec { return pb->jacobian(y) * pa->value(y) - pa->jacobian(y) * pb->value(y); };
  auto value = out.value;
  out.jacobian = [value](const Vec& y) -> Mat { return fd_jacobian(value, y); };
  return out;
}

std::vector<BracketWord> bracket_words(const VectorFieldSystem& sys, int depth) {
  if (depth < 0) throw InvalidArgument("bracket depth must be >= 0");
  std::vector<BracketWord> right;  // letters used on the right of a bracket
  std::vector<BracketWord> words;
  if (present(sys.drift)) right.push_back({"V0", 0, sys.drift});
  for (std::size_t k = 0; k < sys.driving.size(); ++k) {
    BracketWord w{"V" + std::to_string(k + 1), 0, sys.driving[k]};
    words.push_back(w);
    right.push_back(w);
  }
  std::size_t level_begin = 0;
  for (int level = 1; level <= depth; ++level) {
    const std::size_t level_end = words.size();
    for (std::size_t i = level_begin; i < level_end; ++i) {
      for (const auto& u : right) {
        if (words[i].label == u.label) continue;  // [W, W] = 0
        const BracketWord w = words[i];
        words.push_back({"[" + w.label + "," + u.label + "]", level, lie_bracket(w.field, u.field)});
      }
    }
    level_begin = level_end;
  }
  return words;
}

SpanningCheck bracket_spanning_check(const VectorFieldSystem& sys, const Vec& y0, int depth) {
  if (y0.size() != sys.state_dim) throw InvalidArgument("initial state has the wrong dimension");
  const auto words = bracket_words(sys, depth);
  SpanningCheck out;
  out.depth = depth;
  out.state_dim = sys.state_dim;
  out.values.resize(sys.state_dim, static_cast<Eigen::Index>(words.size()));
  for (std::size_t k = 0; k < words.size(); ++k) {
    out.words.push_back(words[k].label);
    out.values.col(static_cast<Eigen::Index>(k)) = words[k].field.value(y0);
  }
  out.rank = numerical_rank(out.values);
  // greedy certificate: keep a word when it raises the rank of the kept set,
  // measured against the global scale so tiny vectors do not count
  const double scale = out.values.size() ? out.values.norm() : 0.0;
  Mat kept(sys.state_dim, 0);
  Eigen::Index kept_rank = 0;
  for (std::size_t k = 0; k < words.size() && kept_rank < out.rank; ++k) {
    Mat trial(sys.state_dim, kept.cols() + 1);
    trial << kept, out.values.col(static_cast<Eigen::Index>(k));
    Eigen::JacobiSVD<Mat> svd(trial);
    const auto& sv = svd.singularValues();
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) r += sv(i) > kRankTolerance * scale;
    if (r > kept_rank) {
      kept = trial;
      kept_rank = r;
      out.basis.push_back(words[k].label);
    }
  }
  return out;
}

std::vector<std::string> known_systems() { return {"ELLIPTIC", "HYPO", "DEGEN"}; }

System shipped_system(const std::string& name) {
  using integration::VectorField;
  System s;
  s.name = name;
  if (name == "ELLIPTIC") {
    s.fields.state_dim = 2;
    s.fields.drift = VectorField::zero(2);
    s.fields.driving = {VectorField::constant(Vec::Unit(2, 0)), VectorField::constant(Vec::Unit(2, 1))};
  } else if (name == "HYPO") {
    Mat a = Mat::Zero(2, 2);
    a(1, 0) = 1.0;
    s.fields.state_dim = 2;
    s.fields.drift = VectorField::affine(a, Vec::Zero(2));
    s.fields.driving = {VectorField::constant(Vec::Unit(2, 0))};
  } else if (name == "DEGEN") {
    s.fields.state_dim = 2;
    s.fields.drift = VectorField::zero(2);
    s.fields.driving = {VectorField::constant(Vec::Unit(2, 0))};
  } else {
    std::ostringstream os;
    os << "unknown system '" << name << "'; known systems:";
    for (const auto& k : known_systems()) os << ' ' << k;
    throw InvalidArgument(os.str());
  }
  s.y0 = Vec::Zero(2);
  return s;
}

std::size_t GramReport::failed_seeds() const {
  return static_cast<std::size_t>(std::count_if(per_seed.begin(), per_seed.end(), [](const SeedGram& g) { return !g.ok; }));
}

double GramReport::min_eig_low() const {
  double v = std::numeric_limits<double>::quiet_NaN();
  for (const auto& g : per_seed)
    if (g.ok) v = std::isnan(v) ? g.min_eig : std::min(v, g.min_eig);
  return v;
}

double GramReport::min_eig_high() const {
  double v = std::numeric_limits<double>::quiet_NaN();
  for (const auto& g : per_seed)
    if (g.ok) v = std::isnan(v) ? g.min_eig : std::max(v, g.min_eig);
  return v;
}

Mat gram_from_trajectory(const VectorFieldSystem& sys, const integration::JacobianTrajectory& traj) {
  const Eigen::Index e = sys.state_dim;
  Mat c = Mat::Zero(e, e);
  for (std::size_t k = 0; k + 1 < traj.times.size(); ++k) {
    const Mat b = traj.backward[k] * sys.driving_matrix(traj.states.col(static_cast<Eigen::Index>(k)));
    c.noalias() += (traj.times[k + 1] - traj.times[k]) * (b * b.transpose());
  }
  return 0.5 * (c + c.transpose());
}

GramReport gram_matrix(const System& sys, const DriverFactory& driver, std::span<const std::uint64_t> seeds,
                       const GramOptions& options, const std::string& driver_label) {
  GramReport rep;
  rep.system = sys.name;
  rep.driver = driver_label;
  rep.seeds.assign(seeds.begin(), seeds.end());
  rep.bracket_depth = options.bracket_depth;
  const SpanningCheck span = bracket_spanning_check(sys.fields, sys.y0, options.bracket_depth);
  rep.bracket_rank = span.rank;
  rep.bracket_basis = span.basis;
  rep.notes = {
      "bracket words: V_0 enters only inside brackets, never as a spanning vector",
      "horizon T stands in for the random stopping time; global non-degeneracy and 0-1 law conditions are assumed, "
      "not checked",
      "gram: left-point quadrature of J_{0<-t} V V^T J_{0<-t}^T dt without Cameron-Martin weighting",
  };
  const std::vector<BracketWord> words =
      options.residuals ? bracket_words(sys.fields, 2) : std::vector<BracketWord>{};

  rep.per_seed.resize(seeds.size());
  std::vector<double> horizons(seeds.size(), 0.0);
  detail::parallel_for(seeds.size(), [&](std::size_t i) {
    SeedGram& g = rep.per_seed[i];
    g.seed = seeds[i];
    const RoughPathGrid path = driver(seeds[i]);
    horizons[i] = path.horizon();
    try {
      const auto traj = integration::jacobian_rde(sys.fields, path, sys.y0, options.rde);
      g.gram = gram_from_trajectory(sys.fields, traj);
      std::tie(g.min_eig, g.kernel_vector) = smallest_eigenpair(g.gram);
      g.max_condition = traj.max_condition;
      if (traj.ill_conditioned) g.flags.push_back("ill_conditioned_jacobian");
      const double top = g.gram.norm();
      g.verdict = g.min_eig > kRankTolerance * std::max(top, 1.0) ? "nondegenerate" : "degenerate";
      if (options.residuals) g.residuals = residual_cascade(words, traj, g.kernel_vector);
    } catch (const NumericalError& ex) {
      g.ok = false;
      g.error = ex.what();
      g.verdict = "failed";
      g.flags.push_back("rde_failure");
    }
  });
  if (!horizons.empty()) rep.horizon = horizons.front();
  return rep;
}

IterationProbe hormander_iteration_probe(const System& sys, const RoughPathGrid& path,
                                         const integration::RdeOptions& rde, std::size_t n_directions,
                                         std::uint64_t seed) {
  const auto traj = integration::jacobian_rde(sys.fields, path, sys.y0, rde);
  IterationProbe out;
  const Mat c = gram_from_trajectory(sys.fields, traj);
  std::tie(out.min_eig, out.z) = smallest_eigenpair(c);
  out.residuals = residual_cascade(bracket_words(sys.fields, 2), traj, out.z);

  const Mat b = transported_fields(sys.fields, traj, traj.times.size() - 1);
  auto score = [&](const Vec& z) { return b.cols() ? (b.transpose() * z).cwiseAbs().maxCoeff() : 0.0; };
  out.level0_min = score(out.z);
  const Eigen::Index e = sys.fields.state_dim;
  if (e == 2) {
    const double pi = std::acos(-1.0);
    for (std::size_t k = 0; k < n_directions; ++k) {
      const double a = pi * static_cast<double>(k) / static_cast<double>(n_directions);
      out.level0_min = std::min(out.level0_min, score(Vec{{std::cos(a), std::sin(a)}}));
    }
  } else {
    Engine engine = make_engine(seed, 0x4d);
    for (std::size_t k = 0; k < n_directions; ++k) out.level0_min = std::min(out.level0_min, score(random_unit_vector(engine, e)));
  }
  out.level0_lower_bound = std::sqrt(std::max(out.min_eig, 0.0) / path.horizon());
  return out;
}

DensityProbe density_probe(const System& sys, const DriverFactory& driver, std::size_t n_seeds,
                           std::uint64_t first_seed, const integration::RdeOptions& rde) {
  if (n_seeds < 100) throw InvalidArgument("density_probe needs at least 100 seeds (got " + std::to_string(n_seeds) + ")");
  const Eigen::Index e = sys.fields.state_dim;
  Mat ends(e, static_cast<Eigen::Index>(n_seeds));
  std::vector<char> ok(n_seeds, 1);
  detail::parallel_for(n_seeds, [&](std::size_t i) {
    try {
      const auto traj = integration::rde_solve(sys.fields, driver(first_seed + i), sys.y0, rde);
      ends.col(static_cast<Eigen::Index>(i)) = traj.states.rightCols(1);
    } catch (const NumericalError&) {
      ok[i] = 0;
    }
  });
  DensityProbe out;
  std::vector<Eigen::Index> good;
  for (std::size_t i = 0; i < n_seeds; ++i)
    if (ok[i]) good.push_back(static_cast<Eigen::Index>(i));
  out.failed = n_seeds - good.size();
  out.samples = good.size();
  if (out.samples < 2) throw NumericalError("density_probe: fewer than 2 successful samples");
  Mat cloud(e, static_cast<Eigen::Index>(good.size()));
  for (std::size_t k = 0; k < good.size(); ++k) cloud.col(static_cast<Eigen::Index>(k)) = ends.col(good[k]);
  out.mean = cloud.rowwise().mean();
  const Mat centred = cloud.colwise() - out.mean;
  out.covariance = centred * centred.transpose() / static_cast<double>(good.size() - 1);
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(out.covariance, Eigen::EigenvaluesOnly);
  out.eigenvalues = eig.eigenvalues();
  const double top = out.eigenvalues(e - 1);
  if (top <= 0.0) {
    out.rank = 0;
    out.collapsed = true;
  } else {
    for (Eigen::Index k = 0; k < e; ++k) out.rank += out.eigenvalues(k) > kCollapseRatio * top;
    out.collapsed = out.eigenvalues(0) < kCollapseRatio * top;
  }
  return out;
}

}  // namespace roughlab::hormander
