#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"
#include "roughlab/errors.hpp"
#include "roughlab/gaussian_sim.hpp"
#include "roughlab/hormander.hpp"
#include "roughlab/rough_core.hpp"
#include "roughlab/rough_integration.hpp"
#include "roughlab/roughness.hpp"
#include "roughlab_tools/cli.hpp"

namespace roughlab::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr std::string_view kCommonKeys[] = {"outdir", "label", "seed", "seeds", "kind", "H", "d", "lambdas",
                                            "family", "family_param", "modes", "T", "N", "refine", "p"};
constexpr std::string_view kRoughnessKeys[] = {"input", "theta", "rho", "levels", "directions", "s_points", "probes",
                                               "worst_samples"};
constexpr std::string_view kDoobMeyerKeys[] = {"f", "g", "window", "order", "second_level", "windows", "s_stride"};
constexpr std::string_view kHormanderKeys[] = {"system", "depth", "density_seeds", "guard"};

std::string fmt(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

bool power_of_two(std::uint64_t n) { return n >= 2 && (n & (n - 1)) == 0; }

// ------------------------------------------------------------ run state

struct Run {
  fs::path dir;
  json items = json::array();
  json summary = json::object();
  json driver = json::object();
  bool numeric_failure = false;
  bool io_failure = false;

  void write(const std::string& name, const std::string& content) {
    const fs::path target = dir / name;
    std::ofstream out(target, std::ios::binary);
    out << content;
    out.close();
    if (!out) {
      io_failure = true;
      items.push_back({{"name", name}, {"status", "failed"}, {"error", "cannot write '" + target.string() + "'"}});
      return;
    }
    items.push_back({{"name", name}, {"status", "ok"}, {"sha256", sha256_hex(content)}});
  }

  void fail(const std::string& name, const std::exception& e) {
    if (dynamic_cast<const IoError*>(&e))
      io_failure = true;
    else
      numeric_failure = true;
    items.push_back({{"name", name}, {"status", "failed"}, {"error", e.what()}});
  }
};

// --------------------------------------------------------------- drivers

struct Driver {
  std::string kind;
  Eigen::Index dim = 1;
  std::size_t steps = 0;
  double horizon = 1.0;
  double p = 2.5;
  double rho = 1.0;
  std::function<RoughPathGrid(std::uint64_t)> make;
  json echo;
};

Driver make_driver(const Config& c, Eigen::Index default_dim) {
  Driver drv;
  drv.kind = c.text("kind", "bm");
  drv.horizon = c.real("T", 1.0);
  drv.steps = c.integer("N", 1024);
  const auto refine = static_cast<unsigned>(c.integer("refine", 6));
  drv.dim = static_cast<Eigen::Index>(c.integer("d", static_cast<std::uint64_t>(default_dim)));
  if (c.has("p")) {
    drv.p = c.real("p", 2.5);
    if (!(drv.p >= 2.0)) throw InvalidArgument("config key 'p': p >= 2 required (got " + fmt(drv.p) + ")");
  }
  drv.echo = {{"kind", drv.kind}, {"T", drv.horizon}, {"N", drv.steps}};

  if (drv.kind == "smooth") {
    if (drv.steps < 2) throw InvalidArgument("config key 'N': grid size N must be >= 2");
    if (!(drv.horizon > 0.0)) throw InvalidArgument("config key 'T': horizon T must be > 0");
    if (drv.dim < 1) throw InvalidArgument("config key 'd': dimension must be >= 1");
    if (!c.has("p")) drv.p = 3.0;
    const std::size_t n = drv.steps;
    const double horizon = drv.horizon;
    const Eigen::Index d = drv.dim;
    const double p = drv.p;
    drv.make = [n, horizon, d, p](std::uint64_t) {
      std::vector<double> t(n + 1);
      Mat x(d, static_cast<Eigen::Index>(n + 1));
      for (std::size_t i = 0; i <= n; ++i) {
        t[i] = horizon * static_cast<double>(i) / static_cast<double>(n);
        x.col(static_cast<Eigen::Index>(i)).setConstant(t[i]);
      }
      t[n] = horizon;
      x.col(static_cast<Eigen::Index>(n)).setConstant(horizon);
      return lift_piecewise_linear(x, std::move(t), ControlFn::hoelder(1.0, p));
    };
    drv.echo["d"] = d;
    drv.echo["p"] = p;
    drv.echo["path"] = "x_t = t in every component";
    return drv;
  }

  gaussian::GaussianSpec spec;
  if (drv.kind == "bm") {
    spec = gaussian::GaussianSpec::brownian(drv.dim, drv.horizon, drv.steps);
  } else if (drv.kind == "fbm") {
    spec = gaussian::GaussianSpec::fractional(c.real("H", 0.5), drv.dim, drv.horizon, drv.steps);
  } else if (drv.kind == "qwiener") {
    if (c.has("lambdas")) {
      spec = gaussian::GaussianSpec::q_wiener(c.reals("lambdas"), drv.horizon, drv.steps);
    } else {
      const std::string fam = c.text("family", "");
      gaussian::EigenFamily family;
      if (fam == "power")
        family = gaussian::EigenFamily::power;
      else if (fam == "geometric")
        family = gaussian::EigenFamily::geometric;
      else
        throw InvalidArgument("config key 'family': qwiener needs 'lambdas' or family = power | geometric");
      spec = gaussian::GaussianSpec::q_wiener(family, c.real("family_param", 0.0), c.integer("modes", 8), drv.horizon,
                                             drv.steps);
    }
    drv.dim = spec.components();
  } else {
    throw InvalidArgument("config key 'kind': expected bm | fbm | qwiener | smooth (got '" + drv.kind + "')");
  }
  spec.refine = refine;
  spec.validate();
  if (!c.has("p")) drv.p = gaussian::default_p(spec);
  drv.rho = spec.rho();
  drv.echo["d"] = spec.components();
  drv.echo["refine"] = refine;
  drv.echo["p"] = drv.p;
  drv.echo["rho"] = drv.rho;
  if (spec.kind == gaussian::DriverKind::fbm) drv.echo["H"] = spec.hurst;
  if (spec.kind == gaussian::DriverKind::qwiener) {
    drv.echo["lambdas"] = spec.lambdas;
    if (const auto tail = gaussian::qwiener_tail_mass(spec)) drv.echo["tail_mass"] = *tail;
  }
  auto lifter = std::make_shared<gaussian::GaussianLifter>(spec, refine, ControlFn::hoelder(1.0, drv.p));
  drv.make = [lifter](std::uint64_t seed) { return (*lifter)(seed); };
  return drv;
}

std::vector<std::uint64_t> seed_list(const Config& c) {
  if (c.has("seeds")) {
    auto s = c.integers("seeds");
    if (s.empty()) throw InvalidArgument("config key 'seeds': empty seed list");
    return s;
  }
  return {c.integer("seed", 0)};
}

std::string seed_tag(std::uint64_t seed) { return "seed" + std::to_string(seed); }

// ------------------------------------------------------------- simulate

void simulate(const Config& c, Run& run) {
  c.require_known(kCommonKeys, "simulate");
  const Driver drv = make_driver(c, 1);
  run.driver = drv.echo;
  const auto seeds = seed_list(c);
  std::size_t ok = 0;
  for (std::uint64_t seed : seeds) {
    const std::string name = "path_" + seed_tag(seed) + ".csv";
    try {
      std::ostringstream os;
      write_csv(os, drv.make(seed));
      run.write(name, os.str());
      ++ok;
    } catch (const NumericalError& e) {
      run.fail(name, e);
    }
  }
  run.summary = {{"seeds", seeds.size()}, {"written", ok}};
}

// ------------------------------------------------------------ roughness

void roughness_cmd(const Config& c, Run& run) {
  std::vector<std::string_view> known(std::begin(kCommonKeys), std::end(kCommonKeys));
  known.insert(known.end(), std::begin(kRoughnessKeys), std::end(kRoughnessKeys));
  c.require_known(known, "roughness");

  roughness::ReportOptions opt;
  if (c.has("levels")) {
    for (auto l : c.integers("levels")) opt.levels.push_back(static_cast<int>(l));
  }
  opt.s_count = c.integer("s_points", 16);
  opt.n_directions = c.integer("directions", 8);
  opt.worst_direction_samples = c.integer("worst_samples", 64);
  opt.ratio.probes = c.integer("probes", 4);
  opt.ratio.theta = c.real("theta", 0.0);
  if (opt.ratio.theta < 0.0) throw InvalidArgument("config key 'theta': theta must be > 0");

  std::vector<std::pair<std::string, std::function<RoughPathGrid()>>> jobs;
  double rho = 1.0;
  if (c.has("input")) {
    const fs::path input = c.text("input", "");
    const double p = c.real("p", 2.5);
    if (!(p >= 2.0)) throw InvalidArgument("config key 'p': p >= 2 required (got " + fmt(p) + ")");
    run.driver = {{"input", input.string()}, {"p", p}};
    jobs.emplace_back("input", [input, p] {
      std::ifstream in(input);
      if (!in) throw IoError("cannot read input path file '" + input.string() + "'");
      return read_csv(in, ControlFn::hoelder(1.0, p));
    });
  } else {
    const Driver drv = make_driver(c, 2);
    if (!power_of_two(drv.steps))
      throw InvalidArgument("config key 'N': dyadic levels need N to be a power of two (got " + std::to_string(drv.steps) + ")");
    run.driver = drv.echo;
    rho = drv.rho;
    for (std::uint64_t seed : seed_list(c)) jobs.emplace_back(seed_tag(seed), [drv, seed] { return drv.make(seed); });
  }
  opt.rho = c.real("rho", rho);

  std::size_t counts[3] = {0, 0, 0};
  std::vector<double> slopes, lil;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const auto& [tag, make] = jobs[k];
    try {
      const RoughPathGrid path = make();
      opt.seed = k;
      const auto rep = roughness::roughness_report(path, opt);
      run.write("report_" + tag + ".json", roughness::report_json(rep) + "\n");
      run.write("report_" + tag + ".csv", roughness::report_csv(rep));
      for (std::size_t s = 0; s < rep.verdicts.size(); ++s)
        for (std::size_t d = 0; d < rep.verdicts[s].size(); ++d) {
          ++counts[static_cast<int>(rep.verdicts[s][d])];
          slopes.push_back(rep.fitted_exponents[s][d]);
        }
      if (rep.lil_level) lil.push_back(*rep.lil_level);
    } catch (const NumericalError& e) {
      run.fail("report_" + tag, e);
    } catch (const IoError& e) {
      run.fail("report_" + tag, e);
      throw;
    }
  }
  const double total = static_cast<double>(counts[0] + counts[1] + counts[2]);
  auto median = [](std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  run.summary = {{"cells", total},
                 {"diverging", total > 0 ? counts[0] / total : 0.0},
                 {"bounded", total > 0 ? counts[1] / total : 0.0},
                 {"inconclusive", total > 0 ? counts[2] / total : 0.0},
                 {"median_exponent", number(median(slopes))},
                 {"median_lil_level", number(median(lil))}};
}

// ------------------------------------------------------------ doobmeyer

struct Scalar {
  std::function<double(double)> f;
  std::function<double(double)> df;
};

Scalar named_scalar(const std::string& key, const std::string& name, bool allow_none) {
  if (name == "sin") return {[](double x) { return std::sin(x); }, [](double x) { return std::cos(x); }};
  if (name == "cos") return {[](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); }};
  if (name == "identity") return {[](double x) { return x; }, [](double) { return 1.0; }};
  if (name == "one") return {[](double) { return 1.0; }, [](double) { return 0.0; }};
  if (name == "minus_one") return {[](double) { return -1.0; }, [](double) { return 0.0; }};
  if (name == "zero") return {[](double) { return 0.0; }, [](double) { return 0.0; }};
  if (allow_none && name == "none") return {};
  throw InvalidArgument("config key '" + key + "': expected sin | cos | identity | one | minus_one | zero" +
                        std::string(allow_none ? " | none" : "") + " (got '" + name + "')");
}

void doobmeyer_cmd(const Config& c, Run& run) {
  std::vector<std::string_view> known(std::begin(kCommonKeys), std::end(kCommonKeys));
  known.insert(known.end(), std::begin(kDoobMeyerKeys), std::end(kDoobMeyerKeys));
  c.require_known(known, "doobmeyer");
  const Driver drv = make_driver(c, 1);
  run.driver = drv.echo;
  const std::string f_name = c.text("f", "sin"), g_name = c.text("g", "cos");
  const Scalar f = named_scalar("f", f_name, false);
  const Scalar g = named_scalar("g", g_name, true);
  const Eigen::Index d = drv.dim;

  integration::IntegrandSpec spec;
  spec.f = [f, d](const Vec& x) {
    Mat out(1, d);
    for (Eigen::Index k = 0; k < d; ++k) out(0, k) = f.f(x[k]);
    return out;
  };
  spec.df = [f, d](const Vec& x) {
    std::vector<Mat> out(static_cast<std::size_t>(d), Mat::Zero(1, d));
    for (Eigen::Index k = 0; k < d; ++k) out[static_cast<std::size_t>(k)](0, k) = f.df(x[k]);
    return out;
  };
  if (g.f) {
    spec.g = [g, d](const Vec& x) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) s += g.f(x[k]);
      return Vec::Constant(1, s);
    };
  }

  roughness::RecoveryOptions opt;
  opt.window = c.integer("window", 32);
  opt.expansion_order = static_cast<int>(c.integer("order", static_cast<std::uint64_t>(opt.expansion_order)));
  opt.second_level = c.flag("second_level", true);
  opt.with_drift = static_cast<bool>(g.f);

  std::vector<std::size_t> windows;
  for (auto w : c.integers("windows")) windows.push_back(w);
  if (windows.empty())
    for (std::size_t w = 1; w <= std::max<std::size_t>(1, drv.steps / 16); w *= 2) windows.push_back(w);
  const std::size_t max_window = *std::max_element(windows.begin(), windows.end());
  if (max_window >= drv.steps) throw InvalidArgument("config key 'windows': windows must be shorter than N");
  const std::size_t stride = c.integer("s_stride", std::max<std::size_t>(1, drv.steps / 16));
  if (stride == 0) throw InvalidArgument("config key 's_stride': must be positive");
  std::vector<std::size_t> s_points;
  for (std::size_t s = 0; s + max_window <= drv.steps; s += stride) s_points.push_back(s);

  double f_err = 0.0, g_err = 0.0;
  std::size_t unidentifiable = 0, nodes = 0;
  std::vector<double> slopes;
  for (std::uint64_t seed : seed_list(c)) {
    const std::string tag = seed_tag(seed);
    try {
      const RoughPathGrid path = drv.make(seed);
      const Mat a = integration::integral_path(spec, path);
      const auto rec = roughness::integrand_recovery(a, path, opt);
      std::ostringstream os;
      os << "node,t";
      for (Eigen::Index k = 1; k <= d; ++k) os << ",x_" << k;
      for (Eigen::Index k = 1; k <= d; ++k) os << ",f_hat_" << k << ",f_true_" << k;
      if (opt.with_drift) os << ",g_hat,g_true";
      os << ",condition,identifiable\n";
      for (std::size_t i = 0; i < rec.nodes.size(); ++i) {
        const Vec x = path.value(rec.nodes[i]);
        os << rec.nodes[i] << ',' << fmt(path.time(rec.nodes[i]));
        for (Eigen::Index k = 0; k < d; ++k) os << ',' << fmt(x[k]);
        for (Eigen::Index k = 0; k < d; ++k) {
          const double truth = f.f(x[k]);
          os << ',' << fmt(rec.f_hat[i](0, k)) << ',' << fmt(truth);
          if (rec.identifiable[i]) f_err = std::max(f_err, std::abs(rec.f_hat[i](0, k) - truth));
        }
        if (opt.with_drift) {
          const double truth = spec.g(x)[0];
          os << ',' << fmt(rec.g_hat[i][0]) << ',' << fmt(truth);
          if (rec.identifiable[i]) g_err = std::max(g_err, std::abs(rec.g_hat[i][0] - truth));
        }
        os << ',' << fmt(rec.condition[i]) << ',' << (rec.identifiable[i] ? 1 : 0) << '\n';
      }
      run.write("recovery_" + tag + ".csv", os.str());
      unidentifiable += rec.unidentifiable_count();
      nodes += rec.nodes.size();
      const auto scan = integration::remainder_scan(spec, path, s_points, windows);
      run.write("remainder_" + tag + ".csv", integration::remainder_csv(scan));
      if (scan.slope) slopes.push_back(*scan.slope);
    } catch (const NumericalError& e) {
      run.fail(tag, e);
    }
  }
  std::sort(slopes.begin(), slopes.end());
  run.summary = {{"f", f_name},
                 {"g", g_name},
                 {"window", opt.window},
                 {"expansion_order", opt.expansion_order},
                 {"nodes", nodes},
                 {"unidentifiable_nodes", unidentifiable},
                 {"f_sup_error", f_err},
                 {"g_sup_error", opt.with_drift ? json(g_err) : json(nullptr)},
                 {"remainder_target_slope", 2.0 / drv.p},
                 {"remainder_median_slope", slopes.empty() ? json(nullptr) : json(slopes[slopes.size() / 2])}};
}

// ------------------------------------------------------------ hormander

void hormander_cmd(const Config& c, Run& run) {
  std::vector<std::string_view> known(std::begin(kCommonKeys), std::end(kCommonKeys));
  known.insert(known.end(), std::begin(kHormanderKeys), std::end(kHormanderKeys));
  c.require_known(known, "hormander");
  const auto sys = hormander::shipped_system(c.text("system", "HYPO"));
  const Driver drv = make_driver(c, sys.fields.driver_dim());
  if (drv.dim != sys.fields.driver_dim())
    throw InvalidArgument("config key 'd': system " + sys.name + " is driven by " +
                          std::to_string(sys.fields.driver_dim()) + " components (got " + std::to_string(drv.dim) + ")");
  run.driver = drv.echo;

  hormander::GramOptions opt;
  opt.bracket_depth = static_cast<int>(c.integer("depth", hormander::kDefaultDepth));
  opt.rde.explosion_guard = c.real("guard", 1e8);
  opt.residuals = true;
  const auto seeds = seed_list(c);
  const auto report = hormander::gram_matrix(sys, drv.make, seeds, opt, drv.kind);
  run.write("gram.json", hormander::gram_report_json(report) + "\n");
  for (const auto& g : report.per_seed)
    if (!g.ok) {
      run.numeric_failure = true;
      run.items.push_back({{"name", "gram_" + seed_tag(g.seed)}, {"status", "failed"}, {"error", g.error}});
    }
  run.summary = {{"system", sys.name},
                 {"bracket_rank", report.bracket_rank},
                 {"bracket_basis", report.bracket_basis},
                 {"seeds", seeds.size()},
                 {"failed_seeds", report.failed_seeds()},
                 {"min_eig_low", number(report.min_eig_low())},
                 {"min_eig_high", number(report.min_eig_high())}};

  const std::size_t density_seeds = c.integer("density_seeds", 0);
  if (density_seeds > 0) {
    const auto dens = hormander::density_probe(sys, drv.make, density_seeds, 0, opt.rde);
    json dj;
    dj["samples"] = dens.samples;
    dj["failed"] = dens.failed;
    dj["mean"] = std::vector<double>(dens.mean.data(), dens.mean.data() + dens.mean.size());
    json cov = json::array();
    for (Eigen::Index r = 0; r < dens.covariance.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index k = 0; k < dens.covariance.cols(); ++k) row.push_back(dens.covariance(r, k));
      cov.push_back(row);
    }
    dj["covariance"] = cov;
    dj["eigenvalues"] = std::vector<double>(dens.eigenvalues.data(), dens.eigenvalues.data() + dens.eigenvalues.size());
    dj["rank"] = dens.rank;
    dj["collapsed"] = dens.collapsed;
    run.write("density.json", dj.dump(2) + "\n");
    run.summary["density_rank"] = dens.rank;
    run.summary["density_collapsed"] = dens.collapsed;
  }
}

bool valid_label(const std::string& label) {
  return !label.empty() && label != "." && label != ".." && label.find('/') == std::string::npos &&
         label.find('\\') == std::string::npos;
}

}  // namespace

int run_subcommand(const std::string& subcommand, const Config& config, std::ostream& out, std::ostream& err) {
  static const std::map<std::string, std::function<void(const Config&, Run&)>> commands{
      {"simulate", simulate}, {"roughness", roughness_cmd}, {"doobmeyer", doobmeyer_cmd}, {"hormander", hormander_cmd}};
  const auto cmd = commands.find(subcommand);
  if (cmd == commands.end()) {
    err << "error: unknown subcommand '" << subcommand << "' (expected simulate | roughness | doobmeyer | hormander)\n";
    return kExitUsage;
  }
  const std::string label = config.text("label", "run");
  if (!valid_label(label)) {
    err << "error: config key 'label': must be a plain directory name (got '" << label << "')\n";
    return kExitUsage;
  }
  Run run;
  run.dir = fs::path(config.text("outdir", "out")) / subcommand / label;
  std::error_code ec;
  fs::create_directories(run.dir, ec);
  if (ec) {
    err << "error: cannot create output directory '" << run.dir.string() << "': " << ec.message() << '\n';
    return kExitIo;
  }

  int code = kExitOk;
  std::string error;
  try {
    cmd->second(config, run);
  } catch (const InvalidArgument& e) {
    code = kExitUsage;
    error = e.what();
  } catch (const IoError& e) {
    code = kExitIo;
    error = e.what();
  } catch (const NumericalError& e) {
    code = kExitNumeric;
    error = e.what();
  } catch (const std::exception& e) {
    code = kExitNumeric;
    error = e.what();
  }
  if (code == kExitOk) {
    if (run.io_failure)
      code = kExitIo;
    else if (run.numeric_failure)
      code = kExitNumeric;
  }

  json manifest;
  manifest["subcommand"] = subcommand;
  manifest["label"] = label;
  manifest["config"] = config.values();
  manifest["driver"] = run.driver;
  manifest["items"] = run.items;
  manifest["summary"] = run.summary;
  manifest["status"] = code == kExitOk ? "ok" : (run.items.empty() ? "failed" : "partial");
  manifest["exit_code"] = code;
  if (!error.empty()) manifest["error"] = error;
  const fs::path manifest_path = run.dir / "manifest.json";
  std::ofstream mf(manifest_path, std::ios::binary);
  mf << manifest.dump(2) << '\n';
  mf.close();
  if (!mf) {
    err << "error: cannot write '" << manifest_path.string() << "'\n";
    return kExitIo;
  }

  if (!error.empty()) err << "error: " << error << '\n';
  out << subcommand << ": " << manifest["status"].get<std::string>() << " -> " << run.dir.string() << '\n';
  return code;
}

}  // namespace roughlab::cli
