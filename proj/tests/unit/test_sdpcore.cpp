#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "stochsafe/config.hpp"
#include "stochsafe/sdp.hpp"
#include "stochsafe/sos.hpp"

using namespace stochsafe;
using namespace stochsafe::sdp;

namespace {

std::string problem_path(const char* name) { return std::string(STOCHSAFE_PROBLEMS_DIR) + "/" + name; }

/// min <C, X> s.t. trace X = 1: the smallest eigenvalue of C.
BlockSdp trace_one(const Eigen::Matrix2d& C) {
  BlockSdp s;
  const int b = s.add_block(2);
  const int r = s.add_row(1.0);
  s.couple(r, b, s.add_atom(b, {{0, 0, 1.0}, {1, 1, 1.0}}), 1.0);
  s.add_objective_entry(b, 0, 0, C(0, 0));
  s.add_objective_entry(b, 0, 1, C(0, 1));
  s.add_objective_entry(b, 1, 1, C(1, 1));
  return s;
}

double min_eig(const Eigen::MatrixXd& M) {
  if (M.rows() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

void expect_certified(const BlockSdp& s, const SdpSolution& sol) {
  ASSERT_EQ(sol.status, SolveStatus::Optimal);
  const double bnorm = s.b.size() ? s.b.lpNorm<Eigen::Infinity>() : 0.0;
  EXPECT_LE(primal_residual(s, sol.X, sol.x_free).lpNorm<Eigen::Infinity>(), 1e-7 * (1 + bnorm));
  EXPECT_LE(sol.relative_gap, 1e-7);
  for (const auto& X : sol.X) EXPECT_GE(min_eig(X), -1e-8);
  for (const auto& S : sol.S) EXPECT_GE(min_eig(S), -1e-8);
}

/// Random instance with a known strictly feasible primal-dual pair.
BlockSdp random_feasible(unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  BlockSdp s;
  const std::vector<int> dims{3, 2, 4};
  for (int d : dims) s.add_block(d);
  const int m = 6;
  std::vector<Eigen::MatrixXd> X0, S0;
  for (int d : dims) {
    Eigen::MatrixXd L = Eigen::MatrixXd::NullaryExpr(d, d, [&] { return g(rng); });
    X0.push_back(L * L.transpose() + Eigen::MatrixXd::Identity(d, d));
    L = Eigen::MatrixXd::NullaryExpr(d, d, [&] { return g(rng); });
    S0.push_back(L * L.transpose() + Eigen::MatrixXd::Identity(d, d));
  }
  const int f = s.add_free(0.0);
  Eigen::VectorXd y0 = Eigen::VectorXd::NullaryExpr(m, [&] { return g(rng); });
  std::vector<Eigen::MatrixXd> C = S0;
  Eigen::VectorXd b(m);
  double bf = 0.0;
  for (int r = 0; r < m; ++r) {
    s.add_row(0.0);
    double rhs = 0.0;
    for (std::size_t k = 0; k < dims.size(); ++k) {
      SparseSym atom;
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dims[k], dims[k]);
      for (int i = 0; i < dims[k]; ++i)
        for (int j = i; j < dims[k]; ++j) {
          const double v = g(rng);
          atom.push_back({i, j, v});
          A(i, j) = A(j, i) = v;
        }
      s.couple(r, static_cast<int>(k), s.add_atom(static_cast<int>(k), atom), 1.0);
      rhs += (A.cwiseProduct(X0[k])).sum();
      C[k] += y0[r] * A;
    }
    const double bc = g(rng);
    s.add_free_entry(r, f, bc);
    rhs += bc * 0.5;
    bf += bc * y0[r];
    b[r] = rhs;
  }
  s.b = b;
  s.c_free[f] = bf;
  for (std::size_t k = 0; k < dims.size(); ++k)
    for (int i = 0; i < dims[k]; ++i)
      for (int j = i; j < dims[k]; ++j) s.add_objective_entry(static_cast<int>(k), i, j, C[k](i, j));
  return s;
}

std::string bytes(const SdpSolution& s) {
  std::string out;
  const auto put = [&](const double* p, Eigen::Index n) {
    out.append(reinterpret_cast<const char*>(p), static_cast<std::size_t>(n) * sizeof(double));
  };
  for (const auto& X : s.X) put(X.data(), X.size());
  for (const auto& S : s.S) put(S.data(), S.size());
  put(s.y.data(), s.y.size());
  put(s.x_free.data(), s.x_free.size());
  return out;
}

}  // namespace

TEST(Solver, TraceConstrainedTwoByTwo) {
  Eigen::Matrix2d C;
  C << 2, 1, 1, 3;
  const auto s = trace_one(C);
  const auto sol = solve(s);
  expect_certified(s, sol);
  EXPECT_NEAR(sol.primal_objective, (5 - std::sqrt(5.0)) / 2, 1e-7);
  EXPECT_NEAR(sol.dual_objective, (5 - std::sqrt(5.0)) / 2, 1e-7);
}

TEST(Solver, FreeVariableLowerBoundedByPsdCone) {
  // min x s.t. [[x, 1], [1, x]] is PSD, written with X = that matrix.
  BlockSdp s;
  const int b = s.add_block(2);
  const int x = s.add_free(1.0);
  const int r0 = s.add_row(0), r1 = s.add_row(0), r2 = s.add_row(1);
  s.couple(r0, b, s.add_atom(b, {{0, 0, 1}}), 1);
  s.couple(r1, b, s.add_atom(b, {{1, 1, 1}}), 1);
  s.couple(r2, b, s.add_atom(b, {{0, 1, 0.5}}), 1);
  s.add_free_entry(r0, x, -1);
  s.add_free_entry(r1, x, -1);
  const auto sol = solve(s);
  expect_certified(s, sol);
  EXPECT_NEAR(sol.x_free[x], 1.0, 1e-7);
}

TEST(Solver, RandomFeasibleInstancesCloseTheGap) {
  for (unsigned seed : {1u, 2u, 3u}) {
    const auto s = random_feasible(seed);
    const auto sol = solve(s);
    expect_certified(s, sol);
    EXPECT_NEAR(sol.primal_objective, sol.dual_objective, 1e-6 * (1 + std::abs(sol.primal_objective)));
  }
}

TEST(Solver, FlagsPrimalInfeasibility) {
  // X00 = -1 has no PSD solution.
  BlockSdp s;
  const int b = s.add_block(1);
  s.couple(s.add_row(-1.0), b, s.add_atom(b, {{0, 0, 1}}), 1);
  EXPECT_EQ(solve(s).status, SolveStatus::PrimalInfeasible);

  // trace X = 1 and trace X = -0.5 together.
  BlockSdp t = trace_one(Eigen::Matrix2d::Identity());
  const int r = t.add_row(-0.5);
  t.couple(r, 0, t.add_atom(0, {{0, 0, 1}, {1, 1, 1}}), 1.0);
  EXPECT_EQ(solve(t).status, SolveStatus::PrimalInfeasible);
}

TEST(Solver, FlagsDualInfeasibility) {
  // min -X00 s.t. X11 = 1 is unbounded below.
  BlockSdp s;
  const int b = s.add_block(2);
  s.couple(s.add_row(1.0), b, s.add_atom(b, {{1, 1, 1}}), 1);
  s.add_objective_entry(b, 0, 0, -1.0);
  EXPECT_EQ(solve(s).status, SolveStatus::DualInfeasible);
}

TEST(Solver, ReSolveIsBitIdentical) {
  const auto p = load_problem(problem_path("cubic.json"));
  const auto [q, rec] = scale_problem(p);
  const auto a = build_unsafe_sdp(q, 2);
  const auto s1 = solve(a.sdp);
  const auto s2 = solve(a.sdp);
  EXPECT_EQ(s1.status, s2.status);
  EXPECT_EQ(s1.iterations, s2.iterations);
  EXPECT_EQ(bytes(s1), bytes(s2));
  expect_certified(a.sdp, s1);
}

TEST(Sdpa, ExportImportRoundTripIsByteIdentical) {
  const auto p = load_problem(problem_path("cubic.json"));
  const auto [q, rec] = scale_problem(p);
  for (const auto& sdp : {build_unsafe_sdp(q, 2).sdp, build_risk_sdp(q, 1).sdp, random_feasible(4),
                          trace_one(Eigen::Matrix2d::Identity())}) {
    std::ostringstream first;
    const auto man = export_sdpa(sdp, first);
    const auto back = SdpaManifest::from_json(man.to_json());
    std::istringstream in(first.str());
    const auto imported = import_sdpa(in, &back);
    std::ostringstream second;
    export_sdpa(imported, second);
    EXPECT_EQ(first.str(), second.str());
    EXPECT_EQ(imported.num_rows(), sdp.num_rows());
    EXPECT_EQ(imported.num_free(), sdp.num_free());
  }
}

TEST(Sdpa, ImportedProgramSolvesToTheSameValue) {
  const auto s = random_feasible(5);
  std::ostringstream out;
  const auto man = export_sdpa(s, out);
  std::istringstream in(out.str());
  const auto t = import_sdpa(in, &man);
  EXPECT_NEAR(solve(s).primal_objective, solve(t).primal_objective, 1e-7);
}

TEST(Sdpa, RejectsMalformedFiles) {
  for (const char* text : {"", "1\n1\n2\n1.0\n0 1 1 1 x\n", "2\n1\n2\n1.0\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(import_sdpa(in), SdpaParseError) << text;
  }
}
