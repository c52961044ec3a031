#include "roughlab/roughness.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "roughlab/errors.hpp"
#include "roughlab/rng.hpp"

namespace roughlab::roughness {

namespace {

double resolve_theta(const RoughPathGrid& path, const RatioOptions& options) {
  const double theta = options.theta > 0.0 ? options.theta : 2.0 / path.p();
  return theta;
}

double window_length(const RoughPathGrid& path, int level) {
  if (level < 0) throw InvalidArgument("level must be >= 0");
  return std::ldexp(path.horizon(), -level);
}

// Last node index with time <= target (tolerant to rounding of dyadic times).
std::size_t last_node_at_or_before(const RoughPathGrid& path, double target) {
  const auto& t = path.times();
  const double tol = 1e-9 * path.horizon() / static_cast<double>(path.num_steps());
  const auto it = std::upper_bound(t.begin(), t.end(), target + tol);
  return static_cast<std::size_t>(it - t.begin()) - 1;
}

// Nodes of (s, s + h] used by the statistic.
std::vector<std::size_t> window_nodes(const RoughPathGrid& path, std::size_t s, int level, std::size_t probes) {
  if (s >= path.num_steps()) throw InvalidArgument("base node s must precede the last grid node");
  const double h = window_length(path, level);
  const double ts = path.time(s);
  const std::size_t last = last_node_at_or_before(path, ts + h);
  if (last < s + 2) {
    std::ostringstream os;
    os << "window at level " << level << " from node " << s
       << " holds fewer than 2 grid nodes; use a finer grid or a coarser level";
    throw InvalidArgument(os.str());
  }
  std::vector<std::size_t> nodes;
  const std::size_t count = last - s;
  if (probes == 0 || count <= probes) {
    nodes.resize(count);
    std::iota(nodes.begin(), nodes.end(), s + 1);
    return nodes;
  }
  for (std::size_t k = 1; k <= probes; ++k) {
    const std::size_t idx = last_node_at_or_before(path, ts + h * static_cast<double>(k) / static_cast<double>(probes));
    if (idx > s && (nodes.empty() || idx > nodes.back())) nodes.push_back(idx);
  }
  return nodes;
}

double safe_ratio(double num, double den) {
  if (num == 0.0) return 0.0;  // 0/0 := 0
  return num / den;
}

void require_unit(const Eigen::VectorXd& v, Eigen::Index d) {
  if (v.size() != d) throw InvalidArgument("direction has the wrong dimension");
  if (std::abs(v.norm() - 1.0) > 1e-9) throw InvalidArgument("direction must be a unit vector");
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

}  // namespace

double ratio_statistic(const RoughPathGrid& path, std::size_t s_index, const Eigen::VectorXd& v, int level,
                       const RatioOptions& options) {
  require_unit(v, path.dim());
  const double theta = resolve_theta(path, options);
  const Eigen::VectorXd xs = path.value(s_index);
  double best = 0.0;
  for (std::size_t t : window_nodes(path, s_index, level, options.probes)) {
    const double num = std::abs(v.dot(path.value(t) - xs));
    best = std::max(best, safe_ratio(num, std::pow(path.omega(s_index, t), theta)));
  }
  return best;
}

double psi(double h, double rho) {
  if (!(h > 0.0) || !(h < std::exp(-1.0))) {
    std::ostringstream os;
    os << "psi(h) needs 0 < h < 1/e ~ " << std::exp(-1.0) << " (got h = " << h << ")";
    throw InvalidArgument(os.str());
  }
  return std::pow(h, 1.0 / (2.0 * rho)) * std::sqrt(std::log(std::log(1.0 / h)));
}

double lil_statistic(const RoughPathGrid& path, std::size_t s_index, const Eigen::VectorXd& phi, int level,
                     double rho) {
  require_unit(phi, path.dim());
  const double h = window_length(path, level);
  if (!(h < std::exp(-1.0))) {
    std::ostringstream os;
    os << "window 2^-" << level << " T = " << h << " too large for psi; need h < 1/e ~ " << std::exp(-1.0);
    throw InvalidArgument(os.str());
  }
  const Eigen::VectorXd xs = path.value(s_index);
  double best = 0.0;
  for (std::size_t t : window_nodes(path, s_index, level, 0)) {
    const double num = std::abs(phi.dot(path.value(t) - xs));
    best = std::max(best, safe_ratio(num, psi(path.time(t) - path.time(s_index), rho)));
  }
  return best;
}

DirectionScan direction_scan(const RoughPathGrid& path, std::size_t s_index, int level, std::size_t n_random,
                             std::uint64_t seed, const RatioOptions& options) {
  const Eigen::Index d = path.dim();
  const double theta = resolve_theta(path, options);
  const std::vector<std::size_t> nodes = window_nodes(path, s_index, level, options.probes);
  Eigen::MatrixXd u(static_cast<Eigen::Index>(nodes.size()), d);
  const Eigen::VectorXd xs = path.value(s_index);
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    const double w = std::pow(path.omega(s_index, nodes[r]), theta);
    const Eigen::VectorXd inc = path.value(nodes[r]) - xs;
    u.row(static_cast<Eigen::Index>(r)) = (w > 0.0 ? Eigen::VectorXd(inc / w) : Eigen::VectorXd::Zero(d)).transpose();
  }
  auto score = [&](const Eigen::VectorXd& v) { return (u * v).cwiseAbs().maxCoeff(); };

  DirectionScan out;
  out.rows = nodes.size();
  if (d == 1) {
    const Eigen::VectorXd e = Eigen::VectorXd::Ones(1);
    out.worst_direction = e;
    out.worst_value = out.random_min = out.singular_value = score(e);
    out.certified_lower_bound = u.norm() / std::sqrt(static_cast<double>(out.rows));
    return out;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(u, Eigen::ComputeFullV);
  const Eigen::VectorXd v_min = svd.matrixV().col(d - 1);
  const double sigma_min = u.rows() >= d ? svd.singularValues()(d - 1) : 0.0;
  out.singular_value = score(v_min);
  out.certified_lower_bound = sigma_min / std::sqrt(static_cast<double>(out.rows));
  out.worst_direction = v_min;
  out.worst_value = out.singular_value;
  out.random_min = std::numeric_limits<double>::infinity();
  Engine engine = make_engine(seed, s_index);
  for (std::size_t k = 0; k < n_random; ++k) {
    const Eigen::VectorXd v = random_unit_vector(engine, d);
    const double value = score(v);
    out.random_min = std::min(out.random_min, value);
    if (value < out.worst_value) {
      out.worst_value = value;
      out.worst_direction = v;
    }
  }
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::diverging: return "diverging";
    case Verdict::bounded: return "bounded";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

ExponentFit exponent_fit(std::span<const int> levels, std::span<const double> values) {
  if (levels.size() != values.size()) throw InvalidArgument("exponent_fit: levels and values differ in length");
  if (levels.size() < 4) throw InvalidArgument("exponent_fit needs at least 4 levels");
  ExponentFit fit;
  if (std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; })) {
    fit.slope = -std::numeric_limits<double>::infinity();
    fit.verdict = Verdict::bounded;
    return fit;
  }
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (values[k] > 0.0 && std::isfinite(values[k])) {
      xs.push_back(levels[k] * std::log(2.0));
      ys.push_back(std::log(values[k]));
    }
  }
  if (xs.size() < 4) throw InvalidArgument("exponent_fit: fewer than 4 finite positive values");
  const auto n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
  }
  if (sxx == 0.0) throw InvalidArgument("exponent_fit: levels must be distinct");
  fit.slope = sxy / sxx;
  fit.used_levels = xs.size();
  fit.verdict = fit.slope >= kDivergingSlope ? Verdict::diverging
                : fit.slope <= kBoundedSlope ? Verdict::bounded
                                             : Verdict::inconclusive;
  return fit;
}

std::vector<int> default_levels(std::size_t steps) {
  int top = 0;
  while ((std::size_t{1} << (top + 1)) <= steps) ++top;
  std::vector<int> levels;
  for (int l = 3; l <= top - 2; ++l) levels.push_back(l);
  return levels;
}

std::vector<std::size_t> default_s_points(const RoughPathGrid& path, std::size_t count, int coarsest_level) {
  const double usable = path.horizon() * (1.0 - std::ldexp(1.0, -coarsest_level));
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < count; ++k) {
    const double target = path.time(0) + usable * (static_cast<double>(k) + 0.5) / static_cast<double>(count);
    const std::size_t idx = last_node_at_or_before(path, target);
    if (out.empty() || idx > out.back()) out.push_back(idx);
  }
  return out;
}

double RoughnessReport::fraction(Verdict v) const {
  std::size_t hit = 0, total = 0;
  for (const auto& row : verdicts)
    for (Verdict x : row) {
      hit += (x == v);
      ++total;
    }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

double RoughnessReport::median_exponent() const {
  std::vector<double> all;
  for (const auto& row : fitted_exponents) all.insert(all.end(), row.begin(), row.end());
  return median(std::move(all));
}

RoughnessReport roughness_report(const RoughPathGrid& path, const ReportOptions& options) {
  RoughnessReport rep;
  rep.p = path.p();
  rep.theta = resolve_theta(path, options.ratio);
  rep.rho = options.rho;
  rep.probes = options.ratio.probes;
  rep.levels = options.levels.empty() ? default_levels(path.num_steps()) : options.levels;
  if (rep.levels.size() < 4) throw InvalidArgument("roughness report needs at least 4 levels (grid too coarse?)");
  std::sort(rep.levels.begin(), rep.levels.end());
  rep.s_indices = options.s_points.empty() ? default_s_points(path, options.s_count, rep.levels.front())
                                           : options.s_points;
  for (std::size_t s : rep.s_indices) rep.s_points.push_back(path.time(s));

  const Eigen::Index d = path.dim();
  if (d == 1) {
    rep.directions.push_back(Eigen::VectorXd::Ones(1));
  } else {
    Engine engine = make_engine(options.seed, 0xd1);
    for (std::size_t k = 0; k < options.n_directions; ++k) rep.directions.push_back(random_unit_vector(engine, d));
  }

  std::vector<double> deepest_lil;
  const std::size_t nl = rep.levels.size();
  for (std::size_t si = 0; si < rep.s_indices.size(); ++si) {
    const std::size_t s = rep.s_indices[si];
    std::vector<std::vector<double>> ratio_rows;
    std::vector<std::vector<std::optional<double>>> lil_rows;
    std::vector<double> exps;
    std::vector<Verdict> verdicts;
    for (const auto& v : rep.directions) {
      std::vector<double> m(nl);
      std::vector<std::optional<double>> lil(nl);
      for (std::size_t li = 0; li < nl; ++li) {
        m[li] = ratio_statistic(path, s, v, rep.levels[li], options.ratio);
        if (options.rho > 0.0 && window_length(path, rep.levels[li]) < std::exp(-1.0))
          lil[li] = lil_statistic(path, s, v, rep.levels[li], options.rho);
      }
      if (lil.back()) deepest_lil.push_back(*lil.back());
      const ExponentFit fit = exponent_fit(rep.levels, m);
      exps.push_back(fit.slope);
      verdicts.push_back(fit.verdict);
      ratio_rows.push_back(std::move(m));
      lil_rows.push_back(std::move(lil));
    }
    std::vector<double> worst(nl);
    for (std::size_t li = 0; li < nl; ++li)
      worst[li] = direction_scan(path, s, rep.levels[li], options.worst_direction_samples, options.seed, options.ratio)
                      .worst_value;
    const ExponentFit wfit = exponent_fit(rep.levels, worst);
    rep.worst_exponents.push_back(wfit.slope);
    rep.worst_verdicts.push_back(wfit.verdict);
    rep.ratio_table.push_back(std::move(ratio_rows));
    rep.lil_table.push_back(std::move(lil_rows));
    rep.fitted_exponents.push_back(std::move(exps));
    rep.verdicts.push_back(std::move(verdicts));
  }
  if (!deepest_lil.empty()) rep.lil_level = median(std::move(deepest_lil));
  return rep;
}

// ---------------------------------------------------------------- recovery

std::size_t RecoveryResult::unidentifiable_count() const {
  return static_cast<std::size_t>(std::count(identifiable.begin(), identifiable.end(), false));
}

namespace {

// Multi-indices of total degree <= order in d variables; the zero index first.
std::vector<std::vector<int>> monomials(Eigen::Index d, int order) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(d), 0);
  for (int deg = 0; deg <= order; ++deg) {
    // enumerate compositions of deg into d parts
    std::function<void(Eigen::Index, int)> rec = [&](Eigen::Index pos, int left) {
      if (pos == d - 1) {
        cur[static_cast<std::size_t>(pos)] = left;
        out.push_back(cur);
        return;
      }
      for (int k = left; k >= 0; --k) {
        cur[static_cast<std::size_t>(pos)] = k;
        rec(pos + 1, left - k);
      }
    };
    rec(0, deg);
  }
  return out;
}

}  // namespace

RecoveryResult integrand_recovery(const Eigen::MatrixXd& output, const RoughPathGrid& path,
                                  const RecoveryOptions& options) {
  const Eigen::Index d = path.dim();
  const Eigen::Index m = output.rows();
  if (output.cols() != static_cast<Eigen::Index>(path.num_nodes()))
    throw InvalidArgument("output path must live on the same grid as the driver");
  if (options.expansion_order < 0) throw InvalidArgument("expansion order must be >= 0");
  const auto monos = monomials(d, options.expansion_order);
  const Eigen::Index n_base = d + (options.second_level ? d * d : 0) + (options.with_drift ? 1 : 0);
  const auto cols = n_base * static_cast<Eigen::Index>(monos.size());
  const std::size_t w = options.window;
  if (w < static_cast<std::size_t>(d) + 2 || static_cast<Eigen::Index>(w) < cols) {
    std::ostringstream os;
    os << "recovery window " << w << " too short: the design has " << cols << " columns";
    throw InvalidArgument(os.str());
  }
  if (w >= path.num_nodes()) throw InvalidArgument("recovery window longer than the grid");

  RecoveryResult res;
  res.columns = static_cast<std::size_t>(cols);
  const auto rows = static_cast<Eigen::Index>(w);
  Eigen::MatrixXd design(rows, cols);
  Eigen::MatrixXd rhs(rows, m);
  Eigen::VectorXd step_row(cols);

  for (std::size_t i = 0; i + w < path.num_nodes(); ++i) {
    const Eigen::VectorXd xi = path.value(i);
    step_row.setZero();
    Eigen::VectorXd running = Eigen::VectorXd::Zero(cols);
    for (std::size_t r = 0; r < w; ++r) {
      const std::size_t k = i + r;
      const Eigen::VectorXd z = path.value(k) - xi;
      const Eigen::VectorXd dx = path.step_first(k);
      const Eigen::MatrixXd xx = path.step_second(k);
      const double dt = path.time(k + 1) - path.time(k);
      Eigen::Index c = 0;
      for (const auto& mono : monos) {
        double weight = 1.0;
        for (Eigen::Index a = 0; a < d; ++a) weight *= std::pow(z[a], mono[static_cast<std::size_t>(a)]);
        for (Eigen::Index a = 0; a < d; ++a) running[c++] += weight * dx[a];
        if (options.second_level)
          for (Eigen::Index a = 0; a < d; ++a)
            for (Eigen::Index b = 0; b < d; ++b) running[c++] += weight * xx(a, b);
        if (options.with_drift) running[c++] += weight * dt;
      }
      design.row(static_cast<Eigen::Index>(r)) = running.transpose();
      rhs.row(static_cast<Eigen::Index>(r)) =
          (output.col(static_cast<Eigen::Index>(k + 1)) - output.col(static_cast<Eigen::Index>(i))).transpose();
    }
    Eigen::VectorXd norms = design.colwise().norm().transpose();
    Eigen::MatrixXd scaled = design;
    bool zero_column = false;
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (norms[c] > 0.0)
        scaled.col(c) /= norms[c];
      else
        zero_column = true;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    const double smin = sv(sv.size() - 1);
    svd.setThreshold(options.rank_tolerance);
    const bool full_rank = !zero_column && smax > 0.0 && svd.rank() == cols;
    Eigen::MatrixXd coef = svd.solve(rhs);  // cols x m, in scaled units
    for (Eigen::Index c = 0; c < cols; ++c)
      if (norms[c] > 0.0) coef.row(c) /= norms[c];

    // monomial 0 occupies the first n_base columns
    Eigen::MatrixXd f_hat = coef.topRows(d).transpose();  // m x d
    res.nodes.push_back(i);
    res.f_hat.push_back(std::move(f_hat));
    if (options.with_drift) res.g_hat.push_back(coef.row(n_base - 1).transpose());
    res.condition.push_back(smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity());
    res.identifiable.push_back(full_rank);
  }
  return res;
}

}  // namespace roughlab::roughness
