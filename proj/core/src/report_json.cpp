#include <charconv>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "roughlab/hormander.hpp"
#include "roughlab/roughness.hpp"

namespace roughlab {

namespace {

using nlohmann::json;

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(number(v[k]));
  return a;
}

json mat_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}

std::string shortest(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

namespace roughness {

std::string report_json(const RoughnessReport& r, int indent) {
  json j;
  j["params"] = {{"theta", r.theta}, {"rho", r.rho}, {"p", r.p}, {"probes", r.probes}};
  j["levels"] = r.levels;
  j["s_points"] = r.s_points;
  j["s_indices"] = r.s_indices;
  json dirs = json::array();
  for (const auto& v : r.directions) dirs.push_back(vec_json(v));
  j["directions"] = dirs;

  json ratio = json::array(), lil = json::array(), slopes = json::array(), verdicts = json::array();
  for (std::size_t s = 0; s < r.s_indices.size(); ++s) {
    json rs = json::array(), ls = json::array(), ss = json::array(), vs = json::array();
    for (std::size_t d = 0; d < r.directions.size(); ++d) {
      json rd = json::array(), ld = json::array();
      for (double m : r.ratio_table[s][d]) rd.push_back(number(m));
      for (const auto& v : r.lil_table[s][d]) ld.push_back(v ? number(*v) : json(nullptr));
      rs.push_back(rd);
      ls.push_back(ld);
      ss.push_back(number(r.fitted_exponents[s][d]));
      vs.push_back(to_string(r.verdicts[s][d]));
    }
    ratio.push_back(rs);
    lil.push_back(ls);
    slopes.push_back(ss);
    verdicts.push_back(vs);
  }
  j["ratio_table"] = ratio;
  j["lil_table"] = lil;
  j["fitted_exponents"] = slopes;
  j["verdicts"] = verdicts;
  json worst_slopes = json::array(), worst_verdicts = json::array();
  for (std::size_t s = 0; s < r.s_indices.size(); ++s) {
    worst_slopes.push_back(number(r.worst_exponents[s]));
    worst_verdicts.push_back(to_string(r.worst_verdicts[s]));
  }
  j["worst_direction"] = {{"fitted_exponents", worst_slopes}, {"verdicts", worst_verdicts}};
  json summary;
  summary["diverging"] = r.fraction(Verdict::diverging);
  summary["bounded"] = r.fraction(Verdict::bounded);
  summary["inconclusive"] = r.fraction(Verdict::inconclusive);
  summary["median_exponent"] = number(r.median_exponent());
  summary["lil_level"] = r.lil_level ? number(*r.lil_level) : json(nullptr);
  j["summary"] = summary;
  j["notes"] = {"slope thresholds +-0.05 are calibration choices",
                "the LIL level is reported; boundedness of the limsup cannot be verified from finite data"};
  return j.dump(indent);
}

std::string report_csv(const RoughnessReport& r) {
  std::ostringstream os;
  os << "s,dir_id,level,ratio,lil,slope,verdict\n";
  for (std::size_t s = 0; s < r.s_indices.size(); ++s)
    for (std::size_t d = 0; d < r.directions.size(); ++d)
      for (std::size_t l = 0; l < r.levels.size(); ++l) {
        const auto& lil = r.lil_table[s][d][l];
        os << shortest(r.s_points[s]) << ',' << d << ',' << r.levels[l] << ',' << shortest(r.ratio_table[s][d][l]) << ','
           << (lil ? shortest(*lil) : std::string()) << ',' << shortest(r.fitted_exponents[s][d]) << ','
           << to_string(r.verdicts[s][d]) << '\n';
      }
  return os.str();
}

}  // namespace roughness

namespace hormander {

std::string gram_report_json(const GramReport& r, int indent) {
  json j;
  j["system"] = r.system;
  j["driver"] = r.driver;
  j["T"] = r.horizon;
  j["seeds"] = r.seeds;
  json per = json::array();
  for (const auto& g : r.per_seed) {
    json e;
    e["seed"] = g.seed;
    e["status"] = g.ok ? "ok" : "failed";
    if (g.ok) {
      e["gram"] = mat_json(g.gram);
      e["min_eig"] = number(g.min_eig);
      e["kernel_vector"] = vec_json(g.kernel_vector);
      e["max_jacobian_condition"] = number(g.max_condition);
    } else {
      e["error"] = g.error;
    }
    json res = json::array();
    for (double v : g.residuals) res.push_back(number(v));
    e["residuals"] = res;
    e["verdict"] = g.verdict;
    e["flags"] = g.flags;
    per.push_back(e);
  }
  j["per_seed"] = per;
  j["bracket_rank"] = r.bracket_rank;
  j["bracket_depth"] = r.bracket_depth;
  j["bracket_basis"] = r.bracket_basis;
  json summary;
  summary["seeds"] = r.per_seed.size();
  summary["failed_seeds"] = r.failed_seeds();
  summary["min_eig_low"] = number(r.min_eig_low());
  summary["min_eig_high"] = number(r.min_eig_high());
  std::size_t degenerate = 0;
  for (const auto& g : r.per_seed) degenerate += g.verdict == "degenerate";
  summary["degenerate_seeds"] = degenerate;
  j["summary"] = summary;
  j["notes"] = r.notes;
  return j.dump(indent);
}

}  // namespace hormander

}  // namespace roughlab
