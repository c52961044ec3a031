#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "roughlab/errors.hpp"
#include "roughlab/rough_core.hpp"

namespace roughlab {

namespace {

void put(std::ostream& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, res.ptr - buf);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != ' ' && c != '\t' && c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_number(const std::string& field, std::size_t line_no) {
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw IoError("csv line " + std::to_string(line_no) + ": cannot parse '" + field + "'");
  return v;
}

std::string expected_header(Eigen::Index d) {
  std::ostringstream os;
  os << "t";
  for (Eigen::Index i = 1; i <= d; ++i) os << ",x_" << i;
  for (Eigen::Index i = 1; i <= d; ++i)
    for (Eigen::Index j = 1; j <= d; ++j) os << ",xx_" << i << j;
  return os.str();
}

}  // namespace

void write_csv(std::ostream& out, const RoughPathGrid& path) {
  const Eigen::Index d = path.dim();
  out << expected_header(d) << '\n';
  put(out, path.time(0));
  for (Eigen::Index c = 0; c < d + d * d; ++c) out << ",0";
  out << '\n';
  for (std::size_t k = 0; k < path.num_steps(); ++k) {
    put(out, path.time(k + 1));
    const Eigen::VectorXd x = path.step_first(k);
    const Eigen::MatrixXd xx = path.step_second(k);
    for (Eigen::Index i = 0; i < d; ++i) {
      out << ',';
      put(out, x[i]);
    }
    // row-major xx_11, xx_12, ...
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) {
        out << ',';
        put(out, xx(i, j));
      }
    out << '\n';
  }
}

RoughPathGrid read_csv(std::istream& in, ControlFn control) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw IoError("csv: empty input");
  const std::vector<std::string> header = split_fields(line);
  // 1 + d + d^2 columns
  Eigen::Index d = 0;
  while (1 + d + d * d < static_cast<Eigen::Index>(header.size())) ++d;
  if (d == 0 || 1 + d + d * d != static_cast<Eigen::Index>(header.size()))
    throw IoError("csv: header has " + std::to_string(header.size()) + " columns, expected 1 + d + d^2");
  std::string joined;
  for (std::size_t i = 0; i < header.size(); ++i) joined += (i ? "," : "") + header[i];
  if (joined != expected_header(d)) throw IoError("csv: header mismatch, expected '" + expected_header(d) + "'");

  std::vector<double> times;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != header.size())
      throw IoError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                    " fields, got " + std::to_string(fields.size()));
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_number(f, line_no));
    times.push_back(row[0]);
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw IoError("csv: need the t_0 row and at least one step");
  for (std::size_t c = 1; c < rows[0].size(); ++c)
    if (rows[0][c] != 0.0) throw IoError("csv: row 0 must carry the identity increment");

  const auto n = static_cast<Eigen::Index>(rows.size() - 1);
  Eigen::MatrixXd first(d, n);
  Eigen::MatrixXd second(d * d, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& row = rows[static_cast<std::size_t>(k + 1)];
    for (Eigen::Index i = 0; i < d; ++i) first(i, k) = row[static_cast<std::size_t>(1 + i)];
    Eigen::MatrixXd xx(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) xx(i, j) = row[static_cast<std::size_t>(1 + d + i * d + j)];
    second.col(k) = xx.reshaped();
  }
  try {
    RoughPathGrid path(std::move(times), std::move(first), std::move(second), std::move(control));
    const double defect = relative_distance(path.increment(0, path.num_steps()), tree_compose(path));
    if (defect > kChenTolerance)
      throw IoError("csv: Chen consistency check failed (relative defect " + std::to_string(defect) + ")");
    return path;
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("csv: ") + e.what());
  }
}

}  // namespace roughlab
