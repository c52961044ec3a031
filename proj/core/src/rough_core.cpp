#include "roughlab/rough_core.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "roughlab/errors.hpp"

namespace roughlab {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw InvalidArgument(std::string(what) + " has non-finite entries");
}

void require_increasing(const std::vector<double>& times) {
  if (times.size() < 2) throw InvalidArgument("time grid needs at least two nodes");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i])) throw InvalidArgument("time grid has non-finite entries");
    if (i > 0 && !(times[i] > times[i - 1])) {
      std::ostringstream os;
      os << "times must be strictly increasing (t_" << i - 1 << " = " << times[i - 1] << ", t_" << i
         << " = " << times[i] << ")";
      throw InvalidArgument(os.str());
    }
  }
}

}  // namespace

Level2Increment::Level2Increment(Eigen::Index dim)
    : first_(Eigen::VectorXd::Zero(dim)), second_(Eigen::MatrixXd::Zero(dim, dim)) {
  if (dim <= 0) throw InvalidArgument("increment dimension must be positive");
}

Level2Increment::Level2Increment(Eigen::VectorXd first, Eigen::MatrixXd second)
    : first_(std::move(first)), second_(std::move(second)) {
  if (first_.size() == 0) throw InvalidArgument("increment dimension must be positive");
  if (second_.rows() != first_.size() || second_.cols() != first_.size())
    throw InvalidArgument("second level must be d x d with d = dim(first)");
  require_finite(first_, "first level");
  require_finite(second_, "second level");
}

Level2Increment Level2Increment::dilate(double lambda) const {
  return Level2Increment(lambda * first_, lambda * lambda * second_);
}

Level2Increment chen_mul(const Level2Increment& a, const Level2Increment& b) {
  if (a.dim() != b.dim()) {
    std::ostringstream os;
    os << "chen_mul: dimension mismatch (" << a.dim() << " vs " << b.dim() << ")";
    throw InvalidArgument(os.str());
  }
  return Level2Increment(a.first() + b.first(),
                         a.second() + b.second() + a.first() * b.first().transpose());
}

Level2Increment inverse(const Level2Increment& a) {
  return Level2Increment(-a.first(), -a.second() + a.first() * a.first().transpose());
}

Level2Increment segment_lift(const Eigen::VectorXd& dx) {
  return Level2Increment(dx, 0.5 * dx * dx.transpose());
}

double geometric_defect(const Level2Increment& a) {
  const Eigen::MatrixXd sym = 0.5 * (a.second() + a.second().transpose());
  return (sym - 0.5 * a.first() * a.first().transpose()).norm();
}

double relative_distance(const Level2Increment& a, const Level2Increment& b) {
  if (a.dim() != b.dim()) throw InvalidArgument("relative_distance: dimension mismatch");
  const double diff = std::max((a.first() - b.first()).norm(), (a.second() - b.second()).norm());
  const double scale = std::max({1.0, a.first().norm(), a.second().norm()});
  return diff / scale;
}

// ---------------------------------------------------------------- ControlFn

ControlFn::ControlFn(Kind kind, double scale, double p, Eigen::MatrixXd table)
    : kind_(kind), scale_(scale), p_(p), table_(std::move(table)) {
  if (!(p_ >= 1.0) || !std::isfinite(p_)) throw InvalidArgument("control exponent p must be >= 1");
}

ControlFn ControlFn::hoelder(double scale, double p) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidArgument("hoelder control scale must be > 0");
  return ControlFn(Kind::hoelder, scale, p, {});
}

ControlFn ControlFn::p_var_table(Eigen::MatrixXd table, double p) {
  if (table.rows() != table.cols() || table.rows() < 2)
    throw InvalidArgument("control table must be square with at least two nodes");
  require_finite(table, "control table");
  return ControlFn(Kind::p_var_table, 1.0, p, std::move(table));
}

double ControlFn::operator()(std::span<const double> times, std::size_t i, std::size_t j) const {
  if (i > j || j >= times.size()) throw InvalidArgument("control: node indices out of range");
  if (kind_ == Kind::hoelder) return scale_ * (times[j] - times[i]);
  if (static_cast<Eigen::Index>(times.size()) != table_.rows())
    throw InvalidArgument("control table size does not match the time grid");
  return table_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

ControlFn ControlFn::with_exponent(double p) const {
  ControlFn c = *this;
  if (!(p >= 1.0)) throw InvalidArgument("control exponent p must be >= 1");
  c.p_ = p;
  return c;
}

double ControlFn::superadditivity_violation(std::span<const double> times) const {
  const std::size_t n = times.size();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    worst = std::max(worst, std::abs((*this)(times, i, i)));
    for (std::size_t j = i; j < n; ++j) {
      const double wij = (*this)(times, i, j);
      worst = std::max(worst, -wij);
      for (std::size_t k = j; k < n; ++k) {
        worst = std::max(worst, wij + (*this)(times, j, k) - (*this)(times, i, k));
      }
    }
  }
  return worst;
}

// ------------------------------------------------------------ RoughPathGrid

RoughPathGrid::RoughPathGrid(std::vector<double> times, const std::vector<Level2Increment>& steps,
                             ControlFn control, Eigen::VectorXd start)
    : times_(std::move(times)), control_(std::move(control)), start_(std::move(start)) {
  if (steps.empty()) throw InvalidArgument("rough path needs at least one step");
  if (steps.size() + 1 != times_.size())
    throw InvalidArgument("number of steps must equal number of nodes minus one");
  const Eigen::Index d = steps.front().dim();
  first_.resize(d, static_cast<Eigen::Index>(steps.size()));
  second_.resize(d * d, static_cast<Eigen::Index>(steps.size()));
  for (std::size_t k = 0; k < steps.size(); ++k) {
    if (steps[k].dim() != d) throw InvalidArgument("steps have inconsistent dimensions");
    const auto col = static_cast<Eigen::Index>(k);
    first_.col(col) = steps[k].first();
    second_.col(col) = steps[k].second().reshaped();
  }
  validate_and_accumulate();
}

RoughPathGrid::RoughPathGrid(std::vector<double> times, Eigen::MatrixXd step_first,
                             Eigen::MatrixXd step_second, ControlFn control, Eigen::VectorXd start)
    : times_(std::move(times)),
      first_(std::move(step_first)),
      second_(std::move(step_second)),
      control_(std::move(control)),
      start_(std::move(start)) {
  if (first_.rows() == 0 || first_.cols() == 0) throw InvalidArgument("rough path needs at least one step");
  if (second_.rows() != first_.rows() * first_.rows() || second_.cols() != first_.cols())
    throw InvalidArgument("second-level storage must be (d*d) x N");
  if (static_cast<std::size_t>(first_.cols()) + 1 != times_.size())
    throw InvalidArgument("number of steps must equal number of nodes minus one");
  validate_and_accumulate();
}

void RoughPathGrid::validate_and_accumulate() {
  require_increasing(times_);
  require_finite(first_, "step first level");
  require_finite(second_, "step second level");
  const Eigen::Index d = first_.rows();
  if (start_.size() == 0) start_ = Eigen::VectorXd::Zero(d);
  if (start_.size() != d) throw InvalidArgument("start point dimension mismatch");
  require_finite(start_, "start point");
  if (control_.kind() == ControlFn::Kind::p_var_table &&
      static_cast<std::size_t>(control_.table().rows()) != times_.size())
    throw InvalidArgument("control table size does not match the time grid");
  values_.resize(d, first_.cols() + 1);
  values_.col(0) = start_;
  for (Eigen::Index k = 0; k < first_.cols(); ++k) values_.col(k + 1) = values_.col(k) + first_.col(k);
}

Eigen::MatrixXd RoughPathGrid::step_second(std::size_t k) const {
  const Eigen::Index d = dim();
  return second_.col(static_cast<Eigen::Index>(k)).reshaped(d, d);
}

Level2Increment RoughPathGrid::step(std::size_t k) const {
  if (k >= num_steps()) throw InvalidArgument("step index out of range");
  return Level2Increment(step_first(k), step_second(k));
}

Level2Increment RoughPathGrid::increment(std::size_t i, std::size_t j) const {
  if (i > j || j >= num_nodes()) {
    std::ostringstream os;
    os << "increment(" << i << ", " << j << ") out of range for " << num_nodes() << " nodes";
    throw InvalidArgument(os.str());
  }
  const Eigen::Index d = dim();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd xx = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t k = i; k < j; ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    xx += second_.col(col).reshaped(d, d);
    xx.noalias() += x * first_.col(col).transpose();
    x += first_.col(col);
  }
  return Level2Increment(std::move(x), std::move(xx));
}

double RoughPathGrid::omega(std::size_t i, std::size_t j) const { return control_(times_, i, j); }

RoughPathGrid RoughPathGrid::slice(std::size_t i, std::size_t j) const {
  if (i >= j || j >= num_nodes()) throw InvalidArgument("slice: need i < j < number of nodes");
  std::vector<double> t(times_.begin() + static_cast<std::ptrdiff_t>(i),
                        times_.begin() + static_cast<std::ptrdiff_t>(j) + 1);
  const auto a = static_cast<Eigen::Index>(i);
  const auto n = static_cast<Eigen::Index>(j - i);
  ControlFn c = control_;
  if (c.kind() == ControlFn::Kind::p_var_table)
    c = ControlFn::p_var_table(control_.table().block(a, a, n + 1, n + 1), control_.exponent_p());
  return RoughPathGrid(std::move(t), first_.middleCols(a, n), second_.middleCols(a, n), std::move(c),
                       value(i));
}

RoughPathGrid RoughPathGrid::coarsen(std::size_t factor) const {
  if (factor == 0 || num_steps() % factor != 0)
    throw InvalidArgument("coarsen: factor must divide the number of steps");
  if (factor == 1) return *this;
  const std::size_t n = num_steps() / factor;
  const Eigen::Index d = dim();
  std::vector<double> t(n + 1);
  Eigen::MatrixXd f(d, static_cast<Eigen::Index>(n));
  Eigen::MatrixXd s(d * d, static_cast<Eigen::Index>(n));
  for (std::size_t b = 0; b < n; ++b) {
    const Level2Increment inc = increment(b * factor, (b + 1) * factor);
    f.col(static_cast<Eigen::Index>(b)) = inc.first();
    s.col(static_cast<Eigen::Index>(b)) = inc.second().reshaped();
    t[b] = times_[b * factor];
  }
  t[n] = times_.back();
  ControlFn c = control_;
  if (c.kind() == ControlFn::Kind::p_var_table) {
    Eigen::MatrixXd table(n + 1, n + 1);
    for (std::size_t a = 0; a <= n; ++a)
      for (std::size_t b = 0; b <= n; ++b)
        table(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            control_.table()(static_cast<Eigen::Index>(a * factor), static_cast<Eigen::Index>(b * factor));
    c = ControlFn::p_var_table(std::move(table), control_.exponent_p());
  }
  return RoughPathGrid(std::move(t), std::move(f), std::move(s), std::move(c), start_);
}

RoughPathGrid RoughPathGrid::with_control(ControlFn control) const {
  return RoughPathGrid(times_, first_, second_, std::move(control), start_);
}

RoughPathGrid RoughPathGrid::dilate(double lambda) const {
  return RoughPathGrid(times_, lambda * first_, lambda * lambda * second_, control_, lambda * start_);
}

// -------------------------------------------------------------- free ops

RoughPathGrid lift_piecewise_linear(const Eigen::MatrixXd& samples, std::vector<double> times,
                                    ControlFn control) {
  if (samples.cols() < 2) throw InvalidArgument("lift needs at least two samples");
  if (static_cast<std::size_t>(samples.cols()) != times.size())
    throw InvalidArgument("lift: number of samples must match number of times");
  require_finite(samples, "samples");
  require_increasing(times);
  const Eigen::Index d = samples.rows();
  const Eigen::Index n = samples.cols() - 1;
  Eigen::MatrixXd first(d, n);
  Eigen::MatrixXd second(d * d, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::VectorXd dx = samples.col(k + 1) - samples.col(k);
    first.col(k) = dx;
    second.col(k) = (0.5 * dx * dx.transpose()).reshaped();
  }
  return RoughPathGrid(std::move(times), std::move(first), std::move(second), std::move(control),
                       samples.col(0));
}

double chen_defect(const RoughPathGrid& path, std::size_t i, std::size_t j, std::size_t k) {
  if (!(i <= j && j <= k)) throw InvalidArgument("chen_defect: need i <= j <= k");
  return relative_distance(path.increment(i, k), chen_mul(path.increment(i, j), path.increment(j, k)));
}

double max_chen_defect(const RoughPathGrid& path, std::size_t max_triples, std::uint64_t seed) {
  const std::size_t n = path.num_nodes();
  double worst = 0.0;
  if (n * n * n <= 6 * max_triples) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j)
        for (std::size_t k = j; k < n; ++k) worst = std::max(worst, chen_defect(path, i, j, k));
    return worst;
  }
  std::mt19937_64 engine(seed);
  std::uniform_int_distribution<std::size_t> node(0, n - 1);
  for (std::size_t r = 0; r < max_triples; ++r) {
    std::size_t a[3] = {node(engine), node(engine), node(engine)};
    std::sort(a, a + 3);
    worst = std::max(worst, chen_defect(path, a[0], a[1], a[2]));
  }
  return worst;
}

namespace {
Level2Increment tree_compose_range(const RoughPathGrid& path, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return path.step(lo);
  const std::size_t mid = lo + (hi - lo) / 2;
  return chen_mul(tree_compose_range(path, lo, mid), tree_compose_range(path, mid, hi));
}
}  // namespace

Level2Increment tree_compose(const RoughPathGrid& path) {
  return tree_compose_range(path, 0, path.num_steps());
}

std::optional<double> hoelder_exponent_fit(const RoughPathGrid& path) {
  const std::size_t n = path.num_steps();
  if (n < 64) throw InvalidArgument("hoelder_exponent_fit needs at least 64 steps");
  const double mesh = path.horizon() / static_cast<double>(n);
  const Eigen::MatrixXd& x = path.values();
  std::vector<double> log_h;
  std::vector<double> log_m;
  for (std::size_t span = 1; span * 4 <= n; span *= 2) {
    double best = 0.0;
    for (std::size_t i = 0; i + span <= n; ++i) {
      best = std::max(best, (x.col(static_cast<Eigen::Index>(i + span)) - x.col(static_cast<Eigen::Index>(i))).norm());
    }
    if (!(best > 0.0)) return std::nullopt;
    log_h.push_back(std::log(static_cast<double>(span) * mesh));
    log_m.push_back(std::log(best));
  }
  const auto m = static_cast<double>(log_h.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < log_h.size(); ++k) {
    mx += log_h[k];
    my += log_m[k];
  }
  mx /= m;
  my /= m;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < log_h.size(); ++k) {
    sxy += (log_h[k] - mx) * (log_m[k] - my);
    sxx += (log_h[k] - mx) * (log_h[k] - mx);
  }
  return sxy / sxx;
}

ControlFn p_variation_control(const RoughPathGrid& path, double p) {
  const std::size_t n = path.num_nodes();
  const auto size = static_cast<Eigen::Index>(n);
  // piece(u, t) = homogeneous norm of X_{u,t}, raised to p.
  auto piece = [&](std::size_t u, std::size_t t) {
    const Level2Increment inc = path.increment(u, t);
    return std::pow(inc.first().norm() + std::sqrt(inc.second().norm()), p);
  };
  Eigen::MatrixXd direct(size, size);
  direct.setZero();
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t t = u + 1; t < n; ++t) direct(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(t)) = piece(u, t);
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(size, size);
  for (std::size_t s = 0; s < n; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    for (std::size_t t = s + 1; t < n; ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      double best = direct(si, ti);
      for (std::size_t u = s + 1; u < t; ++u) {
        const auto ui = static_cast<Eigen::Index>(u);
        best = std::max(best, table(si, ui) + direct(ui, ti));
      }
      table(si, ti) = best;
    }
  }
  return ControlFn::p_var_table(std::move(table), p);
}

}  // namespace roughlab
