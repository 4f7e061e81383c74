#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace stochsafe::cli {

enum ExitCode : int { kOk = 0, kConfig = 1, kSolver = 2, kVerify = 3 };

struct Options {
  std::string config;
  std::pair<int, int> orders{1, 1};
  std::optional<double> r0;
  std::optional<double> horizon;
  std::optional<std::vector<double>> x0;
  int grid = 101;
  /// Time at which grids are evaluated; t0 when unset.
  std::optional<double> grid_time;
  std::uint64_t seed = 0;
  std::filesystem::path out = ".";
  double tol = 1e-5;
  /// Worker cap for concurrent order solves.
  unsigned jobs = 1;
  /// Report bounds from solves that stopped short of the Optimal tolerances without failing the run.
  bool allow_inexact = false;
  bool risk = false;
  bool verbose = false;

  long n = 5000;
  std::optional<double> dt;
  std::string sampling = "fixed";
  int x0_count = 16;
  int trajectories = 0;
};

/// "A..B" or "A"; throws std::invalid_argument on malformed or empty ranges.
std::pair<int, int> parse_orders(const std::string& text);
/// Comma-separated numbers.
std::vector<double> parse_point(const std::string& text);

/// Writes through a temporary file in the same directory and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);

int cmd_bound(const Options& o, std::ostream& out);
int cmd_contour(const Options& o, std::ostream& out);
int cmd_simulate(const Options& o, std::ostream& out);
int cmd_verify(const Options& o, std::ostream& out);
int cmd_export(const Options& o, std::ostream& out);

}  // namespace stochsafe::cli
