#pragma once

// Batch driver for the roughlab experiments.
//
//   roughlab <simulate|roughness|doobmeyer|hormander> [--config FILE] [--set KEY=VALUE ...]
//
// Configuration is flat `key = value` text with `#` comments; command-line
// values override file values.  Every run writes its artifacts and a
// manifest.json under <outdir>/<subcommand>/<label>/.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace roughlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitIo = 4;

class Config {
 public:
  /// Parses `key = value` lines; blank lines and `#` comments are skipped.
  static Config parse(std::string_view text, const std::string& origin = "config");
  static Config load(const std::filesystem::path& file);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  std::string text(const std::string& key, const std::string& fallback) const;
  double real(const std::string& key, double fallback) const;
  std::uint64_t integer(const std::string& key, std::uint64_t fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<double> reals(const std::string& key) const;
  /// Comma lists and inclusive ranges `a..b`.
  std::vector<std::uint64_t> integers(const std::string& key) const;

  /// Rejects keys outside `known`, naming the first offender.
  void require_known(std::span<const std::string_view> known, const std::string& subcommand) const;

 private:
  std::map<std::string, std::string> values_;
};

std::string sha256_hex(std::string_view data);

/// Runs one subcommand on a resolved configuration; returns the exit code.
int run_subcommand(const std::string& subcommand, const Config& config, std::ostream& out, std::ostream& err);

/// Full command-line entry point.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace roughlab::cli
