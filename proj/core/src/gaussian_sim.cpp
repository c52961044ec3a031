#include "roughlab/gaussian_sim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>

#include <boost/math/special_functions/zeta.hpp>
#include <unsupported/Eigen/FFT>

#include "roughlab/errors.hpp"
#include "roughlab/rng.hpp"

namespace roughlab::gaussian {

namespace {

constexpr std::size_t kCholeskyMaxNodes = 4096;

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidArgument(msg);
}

}  // namespace

// ------------------------------------------------------------- GaussianSpec

GaussianSpec GaussianSpec::brownian(Eigen::Index dim, double horizon, std::size_t steps, std::uint64_t seed) {
  GaussianSpec s;
  s.kind = DriverKind::bm;
  s.dim = dim;
  s.horizon = horizon;
  s.steps = steps;
  s.seed = seed;
  return s;
}

GaussianSpec GaussianSpec::fractional(double hurst, Eigen::Index dim, double horizon, std::size_t steps,
                                      std::uint64_t seed) {
  GaussianSpec s = brownian(dim, horizon, steps, seed);
  s.kind = DriverKind::fbm;
  s.hurst = hurst;
  return s;
}

GaussianSpec GaussianSpec::q_wiener(std::vector<double> lambdas, double horizon, std::size_t steps,
                                    std::uint64_t seed) {
  GaussianSpec s = brownian(static_cast<Eigen::Index>(lambdas.size()), horizon, steps, seed);
  s.kind = DriverKind::qwiener;
  s.lambdas = std::move(lambdas);
  return s;
}

GaussianSpec GaussianSpec::q_wiener(EigenFamily family, double param, std::size_t modes, double horizon,
                                    std::size_t steps, std::uint64_t seed) {
  GaussianSpec s = q_wiener(eigenvalue_family(family, param, modes), horizon, steps, seed);
  s.family = family;
  s.family_param = param;
  return s;
}

Eigen::Index GaussianSpec::components() const {
  return kind == DriverKind::qwiener ? static_cast<Eigen::Index>(lambdas.size()) : dim;
}

double GaussianSpec::rho() const { return kind == DriverKind::fbm ? 1.0 / (2.0 * hurst) : 1.0; }

std::vector<double> GaussianSpec::times() const {
  std::vector<double> t(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) t[i] = horizon * static_cast<double>(i) / static_cast<double>(steps);
  t[steps] = horizon;
  return t;
}

void GaussianSpec::validate() const {
  require(std::isfinite(horizon) && horizon > 0.0, "horizon T must be > 0");
  require(steps >= 2, "grid size N must be >= 2");
  if (kind == DriverKind::fbm) require(hurst > 0.0 && hurst < 1.0, "H ∈ (0,1) required (got H = " + std::to_string(hurst) + ")");
  if (kind == DriverKind::qwiener) {
    require(!lambdas.empty(), "qwiener needs at least one eigenvalue");
    for (double l : lambdas) require(std::isfinite(l) && l > 0.0, "qwiener eigenvalues must be > 0");
  } else {
    require(dim >= 1, "dimension d must be >= 1");
  }
}

std::string to_string(DriverKind kind) {
  switch (kind) {
    case DriverKind::bm: return "bm";
    case DriverKind::fbm: return "fbm";
    case DriverKind::qwiener: return "qwiener";
  }
  return "unknown";
}

double default_p(const GaussianSpec& spec) {
  return std::max(2.2, 2.0 * spec.rho() + 0.1);
}

std::vector<double> eigenvalue_family(EigenFamily family, double param, std::size_t modes) {
  std::vector<double> out(modes);
  for (std::size_t k = 1; k <= modes; ++k) {
    switch (family) {
      case EigenFamily::power:
        require(param > 1.0, "power eigenvalue family needs exponent a > 1");
        out[k - 1] = std::pow(static_cast<double>(k), -param);
        break;
      case EigenFamily::geometric:
        require(param > 0.0 && param < 1.0, "geometric eigenvalue family needs ratio in (0,1)");
        out[k - 1] = std::pow(param, static_cast<double>(k));
        break;
      case EigenFamily::none:
        throw InvalidArgument("no eigenvalue family selected");
    }
  }
  return out;
}

std::optional<double> qwiener_tail_mass(const GaussianSpec& spec) {
  if (spec.kind != DriverKind::qwiener) return std::nullopt;
  const auto k = static_cast<double>(spec.lambdas.size());
  switch (spec.family) {
    case EigenFamily::power: {
      double partial = 0.0;
      for (std::size_t i = spec.lambdas.size(); i > 0; --i) partial += std::pow(static_cast<double>(i), -spec.family_param);
      return boost::math::zeta(spec.family_param) - partial;
    }
    case EigenFamily::geometric:
      return std::pow(spec.family_param, k + 1.0) / (1.0 - spec.family_param);
    case EigenFamily::none:
      return std::nullopt;
  }
  return std::nullopt;
}

double fbm_covariance(double hurst, double s, double t) {
  require(hurst > 0.0 && hurst < 1.0, "H ∈ (0,1) required");
  require(s >= 0.0 && t >= 0.0, "fbm_covariance needs s, t >= 0");
  const double h2 = 2.0 * hurst;
  return 0.5 * (std::pow(s, h2) + std::pow(t, h2) - std::pow(std::abs(t - s), h2));
}

CovarianceGrid covariance_grid(const GaussianSpec& spec) {
  spec.validate();
  CovarianceGrid cov;
  cov.times = spec.times();
  const auto n = static_cast<Eigen::Index>(cov.times.size());
  cov.base.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double s = cov.times[static_cast<std::size_t>(i)];
      const double t = cov.times[static_cast<std::size_t>(j)];
      const double r = spec.kind == DriverKind::fbm ? fbm_covariance(spec.hurst, s, t) : std::min(s, t);
      cov.base(i, j) = r;
      cov.base(j, i) = r;
    }
  }
  if (spec.kind == DriverKind::qwiener)
    cov.component_scale = spec.lambdas;
  else
    cov.component_scale.assign(static_cast<std::size_t>(spec.dim), 1.0);
  return cov;
}

// -------------------------------------------------------------- PathSampler

PathSampler::PathSampler(const GaussianSpec& spec, SamplingMethod method) : spec_(spec), method_(method) {
  spec_.validate();
  if (spec_.kind != DriverKind::fbm) return;  // independent increments are exact for min(s,t)

  if (method_ == SamplingMethod::automatic)
    method_ = spec_.steps <= kCholeskyMaxNodes ? SamplingMethod::cholesky : SamplingMethod::circulant;

  const auto n = static_cast<Eigen::Index>(spec_.steps);
  const double dt = spec_.horizon / static_cast<double>(spec_.steps);
  const double h2 = 2.0 * spec_.hurst;

  if (method_ == SamplingMethod::cholesky) {
    Eigen::MatrixXd r(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double v = fbm_covariance(spec_.hurst, dt * static_cast<double>(i + 1), dt * static_cast<double>(j + 1));
        r(i, j) = v;
        r(j, i) = v;
      }
    const double delta = 1e-12 * r.trace() / static_cast<double>(n);
    for (int attempt = 0; attempt <= 2; ++attempt) {
      Eigen::LLT<Eigen::MatrixXd> llt(r);
      if (llt.info() == Eigen::Success) {
        chol_ = llt.matrixL();
        return;
      }
      if (attempt == 2) break;
      r.diagonal().array() += delta;
      jitter_ += delta;
    }
    r.diagonal().array() -= jitter_;
    const double smallest = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(r, Eigen::EigenvaluesOnly).eigenvalues()(0);
    std::ostringstream os;
    os << "covariance factorization failed after jitter; smallest eigenvalue " << smallest;
    throw FactorizationError(os.str(), smallest);
  }

  // Circulant embedding of the fractional Gaussian noise autocovariance.
  const Eigen::Index m = 2 * n;
  std::vector<double> row(static_cast<std::size_t>(m));
  auto gamma = [&](double k) {
    return 0.5 * (std::pow(std::abs(k + 1.0), h2) - 2.0 * std::pow(std::abs(k), h2) + std::pow(std::abs(k - 1.0), h2)) *
           std::pow(dt, h2);
  };
  for (Eigen::Index k = 0; k <= n; ++k) row[static_cast<std::size_t>(k)] = gamma(static_cast<double>(k));
  for (Eigen::Index k = n + 1; k < m; ++k) row[static_cast<std::size_t>(k)] = row[static_cast<std::size_t>(m - k)];
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> eig;
  fft.fwd(eig, row);
  double largest = 0.0;
  for (const auto& e : eig) largest = std::max(largest, e.real());
  circulant_sqrt_eig_.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    double lam = eig[static_cast<std::size_t>(k)].real();
    if (lam < 0.0) {
      if (lam < -1e-10 * largest) {
        std::ostringstream os;
        os << "circulant embedding has a negative eigenvalue " << lam;
        throw FactorizationError(os.str(), lam);
      }
      lam = 0.0;
    }
    circulant_sqrt_eig_[k] = std::sqrt(lam / static_cast<double>(m));
  }
}

Eigen::VectorXd PathSampler::scalar_path(std::uint64_t seed, std::uint64_t stream) const {
  const auto n = static_cast<Eigen::Index>(spec_.steps);
  Engine engine = make_engine(seed, stream);
  Eigen::VectorXd x(n + 1);
  x[0] = 0.0;
  if (spec_.kind != DriverKind::fbm) {
    const Eigen::VectorXd z = standard_normal(engine, n);
    const double sd = std::sqrt(spec_.horizon / static_cast<double>(spec_.steps));
    for (Eigen::Index i = 0; i < n; ++i) x[i + 1] = x[i] + sd * z[i];
    return x;
  }
  if (method_ == SamplingMethod::cholesky) {
    const Eigen::VectorXd z = standard_normal(engine, n);
    x.tail(n).noalias() = chol_.triangularView<Eigen::Lower>() * z;
    return x;
  }
  const Eigen::Index m = circulant_sqrt_eig_.size();
  const Eigen::VectorXd z1 = standard_normal(engine, m);
  const Eigen::VectorXd z2 = standard_normal(engine, m);
  std::vector<std::complex<double>> w(static_cast<std::size_t>(m));
  for (Eigen::Index k = 0; k < m; ++k)
    w[static_cast<std::size_t>(k)] = circulant_sqrt_eig_[k] * std::complex<double>(z1[k], z2[k]);
  std::vector<std::complex<double>> y;
  Eigen::FFT<double> fft;
  fft.fwd(y, w);
  for (Eigen::Index i = 0; i < n; ++i) x[i + 1] = x[i] + y[static_cast<std::size_t>(i)].real();
  return x;
}

Eigen::MatrixXd PathSampler::sample(std::uint64_t seed) const {
  const Eigen::Index d = spec_.components();
  Eigen::MatrixXd out(d, static_cast<Eigen::Index>(spec_.steps) + 1);
  for (Eigen::Index k = 0; k < d; ++k) {
    out.row(k) = scalar_path(seed, static_cast<std::uint64_t>(k)).transpose();
    if (spec_.kind == DriverKind::qwiener) out.row(k) *= std::sqrt(spec_.lambdas[static_cast<std::size_t>(k)]);
  }
  return out;
}

Eigen::MatrixXd sample_path(const GaussianSpec& spec) { return PathSampler(spec).sample(spec.seed); }

// ----------------------------------------------------------- GaussianLifter

namespace {
GaussianSpec refined_spec(const GaussianSpec& spec, unsigned refine) {
  if (refine > 20) throw InvalidArgument("refine level must be <= 20");
  GaussianSpec fine = spec;
  fine.steps = spec.steps << refine;
  return fine;
}
}  // namespace

GaussianLifter::GaussianLifter(const GaussianSpec& spec, unsigned refine, ControlFn control)
    : spec_(spec), refine_(refine), control_(std::move(control)), fine_(refined_spec(spec, refine)) {
  if (spec_.kind == DriverKind::fbm && !(spec_.hurst > 0.25))
    throw InvalidArgument("rough path lift of fBM requires H > 1/4 (rho < 2)");
}

GaussianLifter::GaussianLifter(const GaussianSpec& spec, unsigned refine)
    : GaussianLifter(spec, refine, ControlFn::hoelder(1.0, default_p(spec))) {}

RoughPathGrid GaussianLifter::operator()(std::uint64_t seed) const {
  const Eigen::MatrixXd fine_samples = fine_.sample(seed);
  RoughPathGrid fine = lift_piecewise_linear(fine_samples, fine_.spec().times(), control_);
  if (refine_ == 0) return fine;
  RoughPathGrid coarse = fine.coarsen(std::size_t{1} << refine_);
  // exact node times of the requested grid
  return RoughPathGrid(spec_.times(), coarse.first_matrix(), coarse.second_matrix(), control_, coarse.start());
}

RoughPathGrid lift_gaussian(const GaussianSpec& spec, unsigned refine, ControlFn control) {
  return GaussianLifter(spec, refine, std::move(control))(spec.seed);
}

RoughPathGrid lift_gaussian(const GaussianSpec& spec, unsigned refine) {
  return GaussianLifter(spec, refine)(spec.seed);
}

// ---------------------------------------------------------- diagnostics

double qwiener_sigma(std::span<const double> lambdas, const Eigen::VectorXd& phi) {
  if (static_cast<Eigen::Index>(lambdas.size()) != phi.size())
    throw InvalidArgument("qwiener_sigma: phi has the wrong dimension");
  if (std::abs(phi.norm() - 1.0) > 1e-12) throw InvalidArgument("qwiener_sigma: phi must be a unit vector");
  double s = 0.0;
  for (std::size_t k = 0; k < lambdas.size(); ++k) s += lambdas[k] * phi[static_cast<Eigen::Index>(k)] * phi[static_cast<Eigen::Index>(k)];
  return s;
}

RhoVariation rho_var_2d(const CovarianceGrid& cov, double rho) {
  if (!(rho >= 1.0 && rho < 2.0)) throw InvalidArgument("rho must lie in [1, 2)");
  const Eigen::Index n = cov.base.rows() - 1;  // number of intervals
  if (n < 1 || cov.base.cols() != n + 1) throw InvalidArgument("rho_var_2d: covariance must be square with >= 2 nodes");
  std::size_t top = 1;
  while (top * 2 <= static_cast<std::size_t>(n)) top *= 2;
  RhoVariation out;
  double sup = 0.0;
  for (std::size_t stride = top;; stride /= 2) {
    std::vector<Eigen::Index> nodes;
    for (Eigen::Index i = 0; i <= n; i += static_cast<Eigen::Index>(stride)) nodes.push_back(i);
    if (nodes.back() != n) nodes.push_back(n);
    double sum = 0.0;
    for (std::size_t a = 0; a + 1 < nodes.size(); ++a)
      for (std::size_t b = 0; b + 1 < nodes.size(); ++b) {
        const Eigen::Index s = nodes[a], t = nodes[a + 1], u = nodes[b], v = nodes[b + 1];
        const double rect = cov.base(t, v) - cov.base(s, v) - cov.base(t, u) + cov.base(s, u);
        sum += std::pow(std::abs(rect), rho);
      }
    const double value = std::pow(sum, 1.0 / rho);
    sup = std::max(sup, value);
    out.strides.push_back(stride);
    out.per_level.push_back(value);
    out.running_sup.push_back(sup);
    if (stride == 1) break;
  }
  out.estimate = sup;
  return out;
}

std::vector<MomentProbeRow> moment_condition_probe(const GaussianSpec& spec, std::span<const double> etas,
                                                   std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                                   const MomentProbeOptions& options) {
  spec.validate();
  if (options.samples < 2) throw InvalidArgument("moment probe needs at least two samples");
  for (const auto& [s, t] : pairs)
    if (!(s < t && t <= spec.steps)) throw InvalidArgument("moment probe: need s < t <= N node indices");
  const PathSampler sampler(spec);
  const std::vector<double> times = spec.times();
  const double inv_rho = 1.0 / spec.rho();
  const Eigen::Index d = spec.components();
  const std::size_t n = options.samples;

  // q[p][r]: normalized squared increment of sample r on pair p; var[p]: per-component second moments
  std::vector<std::vector<double>> q(pairs.size(), std::vector<double>(n));
  std::vector<Eigen::VectorXd> second(pairs.size(), Eigen::VectorXd::Zero(d));
  for (std::size_t r = 0; r < n; ++r) {
    const Eigen::MatrixXd x = sampler.sample(stream_seed(spec.seed, r));
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto [s, t] = pairs[p];
      const double scale = std::pow(times[t] - times[s], inv_rho);
      const Eigen::VectorXd inc = (x.col(static_cast<Eigen::Index>(t)) - x.col(static_cast<Eigen::Index>(s))) / std::sqrt(scale);
      q[p][r] = inc.squaredNorm();
      second[p] += inc.cwiseProduct(inc);
    }
  }

  std::vector<MomentProbeRow> rows;
  const double slack = options.pole_slack_sigmas * std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const double max_var = (second[p] / static_cast<double>(n)).maxCoeff();
    for (double eta : etas) {
      double mean = 0.0, m2 = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        const double y = std::exp(eta * q[p][r]);
        const double delta = y - mean;
        mean += delta / static_cast<double>(r + 1);
        m2 += delta * (y - mean);
      }
      MomentProbeRow row;
      row.s_index = pairs[p].first;
      row.t_index = pairs[p].second;
      row.eta = eta;
      row.estimate = mean;
      row.std_error = std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
      row.pole_ratio = 2.0 * eta * max_var;
      row.diverging = !std::isfinite(mean) || mean > options.overflow_guard || row.pole_ratio >= 1.0 - slack;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace roughlab::gaussian
