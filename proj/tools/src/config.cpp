#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "roughlab/errors.hpp"
#include "roughlab_tools/cli.hpp"

namespace roughlab::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& what) {
  throw InvalidArgument("config key '" + key + "': " + what + " (got '" + value + "')");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, v, "expected a number");
  return out;
}

std::uint64_t parse_integer(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, v, "expected a non-negative integer");
  return out;
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& origin) {
  Config c;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw InvalidArgument(origin + ":" + std::to_string(line_no) + ": empty key");
    c.values_[key] = trim(std::string_view(body).substr(eq + 1));
  }
  return c;
}

Config Config::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read config file '" + file.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), file.string());
}

void Config::set(const std::string& key, const std::string& value) { values_[trim(key)] = trim(value); }

std::string Config::text(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::real(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_real(key, it->second);
}

std::uint64_t Config::integer(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_integer(key, it->second);
}

bool Config::flag(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  bad_value(key, v, "expected true or false");
}

std::vector<double> Config::reals(const std::string& key) const {
  std::vector<double> out;
  const auto it = values_.find(key);
  if (it == values_.end()) return out;
  for (const auto& item : split(it->second, ',')) out.push_back(parse_real(key, item));
  return out;
}

std::vector<std::uint64_t> Config::integers(const std::string& key) const {
  std::vector<std::uint64_t> out;
  const auto it = values_.find(key);
  if (it == values_.end()) return out;
  for (const auto& item : split(it->second, ',')) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_integer(key, item));
      continue;
    }
    const std::uint64_t lo = parse_integer(key, trim(item.substr(0, dots)));
    const std::uint64_t hi = parse_integer(key, trim(item.substr(dots + 2)));
    if (hi < lo) bad_value(key, item, "range end below range start");
    if (hi - lo > 1000000) bad_value(key, item, "range too long");
    for (std::uint64_t k = lo; k <= hi; ++k) out.push_back(k);
  }
  return out;
}

void Config::require_known(std::span<const std::string_view> known, const std::string& subcommand) const {
  for (const auto& [key, value] : values_) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw InvalidArgument("unknown config key '" + key + "' for " + subcommand);
  }
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 computation failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

}  // namespace roughlab::cli
