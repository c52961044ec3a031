#include "roughlab/rough_integration.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <cmath>
#include <limits>
#include <exception>

#include "roughlab/errors.hpp"

namespace roughlab::integration {

namespace {

template <class Fn>
auto guarded(std::size_t step, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const CallbackError&) {
    throw;
  } catch (const std::exception& e) {
    throw CallbackError(step, e.what());
  }
}

// Compensated increment of one step given the running value x0.
Vec step_integral(const IntegrandSpec& spec, const RoughPathGrid& path, std::size_t k) {
  const Vec x0 = path.value(k);
  const Vec dx = path.step_first(k);
  const Mat xx = path.step_second(k);
  return guarded(k, [&]() -> Vec {
    const Mat fx = spec.f(x0);
    if (fx.cols() != path.dim()) throw InvalidArgument("integrand f must return an m x d matrix");
    Vec out = fx * dx;
    if (spec.df) {
      const std::vector<Mat> d = spec.df(x0);
      if (static_cast<Eigen::Index>(d.size()) != path.dim()) throw InvalidArgument("Df must hold d matrices");
      for (Eigen::Index j = 0; j < path.dim(); ++j) out.noalias() += d[static_cast<std::size_t>(j)] * xx.row(j).transpose();
    }
    if (spec.g) out += spec.g(x0) * (path.time(k + 1) - path.time(k));
    return out;
  });
}

}  // namespace

double derivative_consistency(const IntegrandSpec& spec, std::span<const Vec> probes, double h) {
  double worst = 0.0;
  for (const Vec& x : probes) {
    const std::vector<Mat> d = spec.df(x);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      Vec xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const Mat fd = (spec.f(xp) - spec.f(xm)) / (2.0 * h);
      const Mat& an = d.at(static_cast<std::size_t>(j));
      worst = std::max(worst, (fd - an).norm() / std::max(1.0, an.norm()));
    }
  }
  return worst;
}

Vec rough_integral(const IntegrandSpec& spec, const RoughPathGrid& path, std::size_t i, std::size_t j) {
  if (i > j || j >= path.num_nodes()) throw InvalidArgument("rough_integral: need i <= j < number of nodes");
  if (!spec.f) throw InvalidArgument("rough_integral: integrand f is not set");
  Vec total;
  for (std::size_t k = i; k < j; ++k) {
    Vec inc = step_integral(spec, path, k);
    if (total.size() == 0)
      total = std::move(inc);
    else
      total += inc;
  }
  if (total.size() == 0) total = Vec::Zero(spec.f(path.value(i)).rows());
  return total;
}

Mat integral_path(const IntegrandSpec& spec, const RoughPathGrid& path) {
  if (!spec.f) throw InvalidArgument("integral_path: integrand f is not set");
  const Eigen::Index m = spec.f(path.value(0)).rows();
  Mat out(m, static_cast<Eigen::Index>(path.num_nodes()));
  out.col(0).setZero();
  for (std::size_t k = 0; k < path.num_steps(); ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    out.col(c + 1) = out.col(c) + step_integral(spec, path, k);
  }
  return out;
}

RemainderScan remainder_scan(const IntegrandSpec& spec, const RoughPathGrid& path,
                             std::span<const std::size_t> s_indices, std::span<const std::size_t> windows) {
  RemainderScan scan;
  const double theta = 2.0 / path.p();
  scan.target_slope = theta;
  const Mat running = integral_path(spec, path);
  std::vector<double> log_h, log_r;
  for (std::size_t w : windows) {
    if (w == 0) throw InvalidArgument("remainder_scan: window length must be positive");
    double sum = 0.0, span_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t s : s_indices) {
      const std::size_t t = s + w;
      if (t >= path.num_nodes()) throw InvalidArgument("remainder_scan: window exceeds the grid");
      const Vec integral = running.col(static_cast<Eigen::Index>(t)) - running.col(static_cast<Eigen::Index>(s));
      const Vec first_order = guarded(s, [&] { return Vec(spec.f(path.value(s)) * (path.value(t) - path.value(s))); });
      RemainderRow row;
      row.s_index = s;
      row.t_index = t;
      row.s = path.time(s);
      row.t = path.time(t);
      row.omega = path.omega(s, t);
      row.remainder = (integral - first_order).norm();
      row.ratio = row.omega > 0.0 ? row.remainder / std::pow(row.omega, theta) : 0.0;
      scan.rows.push_back(row);
      sum += row.remainder;
      span_sum += row.t - row.s;
      ++count;
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    if (mean > 0.0) {
      log_h.push_back(std::log(span_sum / static_cast<double>(count)));
      log_r.push_back(std::log(mean));
    }
  }
  if (log_h.size() >= 2) {
    const auto n = static_cast<double>(log_h.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < log_h.size(); ++k) {
      mx += log_h[k] / n;
      my += log_r[k] / n;
    }
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < log_h.size(); ++k) {
      sxy += (log_h[k] - mx) * (log_r[k] - my);
      sxx += (log_h[k] - mx) * (log_h[k] - mx);
    }
    if (sxx > 0.0) scan.slope = sxy / sxx;
  }
  return scan;
}

// ------------------------------------------------------------- VectorField

VectorField VectorField::zero(Eigen::Index e) {
  return {[e](const Vec&) { return Vec(Vec::Zero(e)); }, [e](const Vec&) { return Mat(Mat::Zero(e, e)); },
          [e](const Vec&, const Vec&) { return Mat(Mat::Zero(e, e)); }};
}

VectorField VectorField::constant(Vec c) {
  const Eigen::Index e = c.size();
  return {[c](const Vec&) { return c; }, [e](const Vec&) { return Mat(Mat::Zero(e, e)); },
          [e](const Vec&, const Vec&) { return Mat(Mat::Zero(e, e)); }};
}

VectorField VectorField::affine(Mat a, Vec b) {
  const Eigen::Index e = a.rows();
  return {[a, b](const Vec& y) { return Vec(a * y + b); }, [a](const Vec&) { return a; },
          [e](const Vec&, const Vec&) { return Mat(Mat::Zero(e, e)); }};
}

Mat VectorField::second_derivative(const Vec& y, const Vec& w) const {
  if (second) return second(y, w);
  const double scale = std::max(1.0, y.norm());
  const double wn = w.norm();
  if (wn == 0.0) return Mat::Zero(y.size(), y.size());
  const double h = 1e-5 * scale / wn;
  return (jacobian(y + h * w) - jacobian(y - h * w)) / (2.0 * h);
}

Mat VectorFieldSystem::driving_matrix(const Vec& y) const {
  Mat v(state_dim, driver_dim());
  for (Eigen::Index k = 0; k < driver_dim(); ++k) v.col(k) = driving[static_cast<std::size_t>(k)].value(y);
  return v;
}

// ------------------------------------------------------------------ RDEs

namespace {

void check_system(const VectorFieldSystem& sys, const RoughPathGrid& path, const Vec& y0) {
  if (sys.state_dim <= 0) throw InvalidArgument("state dimension must be positive");
  if (y0.size() != sys.state_dim) throw InvalidArgument("initial state has the wrong dimension");
  if (sys.driver_dim() != path.dim()) throw InvalidArgument("number of driving fields must equal the path dimension");
}

struct StepFields {
  Mat v;                 // e x d
  std::vector<Mat> dv;   // d Jacobians
};

StepFields eval_fields(const VectorFieldSystem& sys, const Vec& y) {
  StepFields f{sys.driving_matrix(y), {}};
  f.dv.reserve(sys.driving.size());
  for (const auto& field : sys.driving) f.dv.push_back(field.jacobian(y));
  return f;
}

Vec level2_step(const VectorFieldSystem& sys, const StepFields& f, const Vec& y, const Vec& dx, const Mat& xx,
                double dt, bool with_drift) {
  Vec next = y + f.v * dx;
  const Eigen::Index d = dx.size();
  for (Eigen::Index k = 0; k < d; ++k)
    for (Eigen::Index j = 0; j < d; ++j) {
      if (xx(j, k) == 0.0) continue;
      next.noalias() += xx(j, k) * (f.dv[static_cast<std::size_t>(k)] * f.v.col(j));
    }
  if (with_drift && sys.drift.value) next += sys.drift.value(y) * dt;
  return next;
}

void guard_state(const Vec& y, std::size_t step, double guard) {
  const double n = y.norm();
  if (!std::isfinite(n) || n > guard) throw BlowUpError(step, n, guard);
}

}  // namespace

Trajectory rde_solve(const VectorFieldSystem& sys, const RoughPathGrid& path, const Vec& y0,
                     const RdeOptions& options) {
  check_system(sys, path, y0);
  Trajectory out{path.times(), Mat(sys.state_dim, static_cast<Eigen::Index>(path.num_nodes()))};
  Vec y = y0;
  out.states.col(0) = y;
  for (std::size_t k = 0; k < path.num_steps(); ++k) {
    y = guarded(k, [&] {
      const StepFields f = eval_fields(sys, y);
      return level2_step(sys, f, y, path.step_first(k), path.step_second(k), path.time(k + 1) - path.time(k),
                         options.with_drift);
    });
    guard_state(y, k, options.explosion_guard);
    out.states.col(static_cast<Eigen::Index>(k + 1)) = y;
  }
  return out;
}

JacobianTrajectory jacobian_rde(const VectorFieldSystem& sys, const RoughPathGrid& path, const Vec& y0,
                                const RdeOptions& options) {
  check_system(sys, path, y0);
  const Eigen::Index e = sys.state_dim;
  const Eigen::Index d = path.dim();
  JacobianTrajectory out;
  out.times = path.times();
  out.states.resize(e, static_cast<Eigen::Index>(path.num_nodes()));
  out.forward.reserve(path.num_nodes());
  out.backward.reserve(path.num_nodes());

  Vec y = y0;
  Mat j = Mat::Identity(e, e);
  out.states.col(0) = y;
  out.forward.push_back(j);
  out.backward.push_back(j);

  for (std::size_t k = 0; k < path.num_steps(); ++k) {
    const Vec dx = path.step_first(k);
    const Mat xx = path.step_second(k);
    const double dt = path.time(k + 1) - path.time(k);
    guarded(k, [&] {
      const StepFields f = eval_fields(sys, y);
      Mat dj = Mat::Zero(e, e);
      for (Eigen::Index a = 0; a < d; ++a) dj.noalias() += dx[a] * f.dv[static_cast<std::size_t>(a)];
      for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < d; ++b) {
          // augmented field (V_a, DV_a J) differentiated along (V_b, DV_b J)
          if (xx(b, a) == 0.0) continue;
          const Mat second = sys.driving[static_cast<std::size_t>(a)].second_derivative(y, f.v.col(b));
          dj.noalias() += xx(b, a) * (second + f.dv[static_cast<std::size_t>(a)] * f.dv[static_cast<std::size_t>(b)]);
        }
      if (options.with_drift && sys.drift.jacobian) dj.noalias() += dt * sys.drift.jacobian(y);
      const Vec next = level2_step(sys, f, y, dx, xx, dt, options.with_drift);
      j = j + dj * j;
      y = next;
      return 0;
    });
    guard_state(y, k, options.explosion_guard);
    out.states.col(static_cast<Eigen::Index>(k + 1)) = y;

    Eigen::JacobiSVD<Mat> svd(j);
    const auto& sv = svd.singularValues();
    const double cond = sv(e - 1) > 0.0 ? sv(0) / sv(e - 1) : std::numeric_limits<double>::infinity();
    out.max_condition = std::max(out.max_condition, cond);
    if (cond > kConditionWarning) out.ill_conditioned = true;
    out.forward.push_back(j);
    out.backward.push_back(j.colPivHouseholderQr().solve(Mat::Identity(e, e)));
  }
  return out;
}

}  // namespace roughlab::integration

namespace roughlab::integration {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void states_header(std::ostringstream& os, Eigen::Index e) {
  os << 't';
  for (Eigen::Index k = 1; k <= e; ++k) os << ",y_" << k;
}

}  // namespace

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream os;
  const Eigen::Index e = traj.states.rows();
  states_header(os, e);
  os << '\n';
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    os << fmt(traj.times[i]);
    for (Eigen::Index k = 0; k < e; ++k) os << ',' << fmt(traj.states(k, static_cast<Eigen::Index>(i)));
    os << '\n';
  }
  return os.str();
}

std::string trajectory_csv(const JacobianTrajectory& traj) {
  std::ostringstream os;
  const Eigen::Index e = traj.states.rows();
  states_header(os, e);
  for (Eigen::Index r = 1; r <= e; ++r)
    for (Eigen::Index c = 1; c <= e; ++c) os << ",j_" << r << c;
  os << '\n';
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    os << fmt(traj.times[i]);
    for (Eigen::Index k = 0; k < e; ++k) os << ',' << fmt(traj.states(k, static_cast<Eigen::Index>(i)));
    for (Eigen::Index r = 0; r < e; ++r)
      for (Eigen::Index c = 0; c < e; ++c) os << ',' << fmt(traj.forward[i](r, c));
    os << '\n';
  }
  return os.str();
}

std::string remainder_csv(const RemainderScan& scan) {
  std::ostringstream os;
  os << "s,t,omega,remainder,ratio\n";
  for (const auto& r : scan.rows)
    os << fmt(r.s) << ',' << fmt(r.t) << ',' << fmt(r.omega) << ',' << fmt(r.remainder) << ',' << fmt(r.ratio) << '\n';
  return os.str();
}

}  // namespace roughlab::integration
