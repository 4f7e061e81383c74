#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "stochsafe/cli.hpp"

namespace cli = stochsafe::cli;
namespace fs = std::filesystem;

namespace {

std::string problem_path(const char* name) { return std::string(STOCHSAFE_PROBLEMS_DIR) + "/" + name; }

fs::path scratch(const char* name) {
  auto d = fs::temp_directory_path() / ("stochsafe_cli_" + std::string(name));
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST(Cli, ParsesOrderRanges) {
  EXPECT_EQ(cli::parse_orders("1..4"), std::make_pair(1, 4));
  EXPECT_EQ(cli::parse_orders("3"), std::make_pair(3, 3));
  for (const char* bad : {"", "0", "4..1", "a..b", "1..", "1...3", "2x"}) EXPECT_THROW(cli::parse_orders(bad), std::invalid_argument) << bad;
}

TEST(Cli, ParsesPoints) {
  EXPECT_EQ(cli::parse_point("0.85,-0.75"), (std::vector<double>{0.85, -0.75}));
  EXPECT_THROW(cli::parse_point("0.85,,"), std::invalid_argument);
  EXPECT_THROW(cli::parse_point("x"), std::invalid_argument);
}

TEST(Cli, AtomicWriteLeavesNoTemporaries) {
  const auto dir = scratch("atomic");
  cli::write_atomic(dir / "a.txt", "one");
  cli::write_atomic(dir / "a.txt", "two");
  EXPECT_EQ(slurp(dir / "a.txt"), "two");
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir)) files += e.is_regular_file();
  EXPECT_EQ(files, 1);
}

TEST(Cli, BoundWritesTableAndCertificates) {
  cli::Options o;
  o.config = problem_path("cubic.json");
  o.orders = {1, 2};
  o.out = scratch("bound");
  std::ostringstream out;
  EXPECT_EQ(cli::cmd_bound(o, out), cli::kOk);
  const auto table = nlohmann::json::parse(slurp(o.out / "bounds.json"));
  ASSERT_EQ(table.size(), 2u);
  EXPECT_EQ(table[0]["order"], 1);
  EXPECT_NEAR(table[0]["bound"].get<double>(), 1.0, 1e-6);
  EXPECT_TRUE(fs::exists(o.out / "certificate_k2.json"));
  EXPECT_NE(out.str().find("Optimal"), std::string::npos);
}

TEST(Cli, RepeatedRunsProduceIdenticalFiles) {
  cli::Options o;
  o.config = problem_path("cubic.json");
  o.orders = {1, 2};
  o.grid = 9;
  o.out = scratch("repeat_a");
  std::ostringstream sink;
  ASSERT_EQ(cli::cmd_contour(o, sink), cli::kOk);
  const auto first = slurp(o.out / "contour.csv");
  const auto cert = slurp(o.out / "risk_certificate_k2.json");
  o.out = scratch("repeat_b");
  o.jobs = 2;
  ASSERT_EQ(cli::cmd_contour(o, sink), cli::kOk);
  EXPECT_EQ(first, slurp(o.out / "contour.csv"));
  EXPECT_EQ(cert, slurp(o.out / "risk_certificate_k2.json"));
  EXPECT_EQ(first.substr(0, first.find('\n')), "x1,x2,q,order");
}

TEST(Cli, SimulateAndExport) {
  cli::Options o;
  o.config = problem_path("discrete.json");
  o.n = 500;
  o.seed = 7;
  o.trajectories = 1;
  o.out = scratch("sim");
  std::ostringstream sink;
  ASSERT_EQ(cli::cmd_simulate(o, sink), cli::kOk);
  const auto e = nlohmann::json::parse(slurp(o.out / "estimate.json"));
  EXPECT_EQ(e["N"], 500);
  EXPECT_EQ(e["seed"], 7);
  EXPECT_EQ(slurp(o.out / "trajectory_0.csv").substr(0, 12), "t,x1,x2,hit\n");

  o.orders = {2, 2};
  ASSERT_EQ(cli::cmd_export(o, sink), cli::kOk);
  EXPECT_TRUE(fs::exists(o.out / "discrete_unsafe_bound_k2.dat-s"));
  EXPECT_TRUE(fs::exists(o.out / "discrete_unsafe_bound_k2.manifest.json"));
}

TEST(Cli, ConfigErrorsExitWithOne) {
  cli::Options o;
  o.config = problem_path("missing.json");
  o.out = scratch("err");
  std::ostringstream sink;
  EXPECT_EQ(cli::cmd_bound(o, sink), cli::kConfig);
  o.config = problem_path("cubic.json");
  o.x0 = std::vector<double>{1.0};
  EXPECT_EQ(cli::cmd_bound(o, sink), cli::kConfig);
  EXPECT_FALSE(fs::exists(o.out / "bounds.json"));
}
