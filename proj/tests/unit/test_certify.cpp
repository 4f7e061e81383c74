#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "stochsafe/certify.hpp"
#include "stochsafe/config.hpp"
#include "stochsafe/parse.hpp"

using namespace stochsafe;

namespace {

std::string problem_path(const char* name) { return std::string(STOCHSAFE_PROBLEMS_DIR) + "/" + name; }

/// Cubic problem whose initial point lies in the unsafe set.
SafetyProblem start_unsafe() { return with_initial_point(load_problem(problem_path("cubic.json")), {0.6, 0.0}); }

}  // namespace

TEST(Certificate, LowOrderBoundsVerify) {
  const auto p = load_problem(problem_path("cubic.json"));
  double previous = 2.0;
  for (int k = 1; k <= 2; ++k) {
    const auto s = solve_order(p, k, Variant::UnsafeBound);
    auto c = extract_certificate(s);
    c.report = verify_certificate(c, p, s);
    EXPECT_TRUE(c.report.passed()) << to_json(c.report).dump();
    EXPECT_GE(c.report.min_gram_eigenvalue, -1e-8);
    EXPECT_LE(c.bound, 1.0 + 1e-6);
    EXPECT_LE(c.bound, previous + 5e-3);
    previous = c.bound;
    // The original-coordinate v reproduces the scaled bound at the initial point.
    EXPECT_NEAR(c.v.evaluate(p.point(p.t0, *p.X0.center)), c.v_scaled.evaluate(s.scaled.point(0.0, *s.scaled.X0.center)),
                1e-9);
    EXPECT_LE(c.v.evaluate(p.point(p.t0, *p.X0.center)), c.bound + 1e-6);
  }
  EXPECT_NEAR(previous, 0.3326, 5e-4);
}

TEST(Certificate, InitialPointInsideUnsafeSetGivesOne) {
  const auto p = start_unsafe();
  for (int k = 1; k <= 2; ++k) {
    const auto s = solve_order(p, k, Variant::UnsafeBound);
    const auto c = extract_certificate(s);
    EXPECT_NEAR(c.bound, 1.0, 1e-3) << "order " << k;
  }
}

TEST(Certificate, DualMomentsSatisfyLiouville) {
  const auto p = load_problem(problem_path("cubic.json"));
  for (Variant v : {Variant::UnsafeBound, Variant::RiskContour}) {
    const auto s = solve_order(p, 2, v);
    ASSERT_EQ(s.solution.status, sdp::SolveStatus::Optimal);
    const auto d = moment_diagnostics(s);
    EXPECT_LE(d.max_residual(), 1e-6);
    EXPECT_NEAR(d.mass_initial, 1.0, 1e-6);
    // Every trajectory stops exactly once, and spends at most the horizon.
    EXPECT_NEAR(d.mass_terminal, 1.0, 1e-6);
    EXPECT_GE(d.mass_occupation, -1e-8);
    EXPECT_LE(d.mass_occupation, 1.0 + 1e-6);
  }
}

TEST(Certificate, RejectsInexactUnlessAllowed) {
  auto s = solve_order(load_problem(problem_path("cubic.json")), 1, Variant::UnsafeBound);
  s.solution.status = sdp::SolveStatus::NumericalTrouble;
  EXPECT_THROW(extract_certificate(s), CertificateError);
  EXPECT_NO_THROW(extract_certificate(s, true));
  s.solution.status = sdp::SolveStatus::PrimalInfeasible;
  EXPECT_THROW(extract_certificate(s, true), CertificateError);
}

TEST(Certificate, VerificationCatchesATamperedCertificate) {
  const auto p = load_problem(problem_path("cubic.json"));
  const auto s = solve_order(p, 2, Variant::UnsafeBound);
  auto c = extract_certificate(s);
  c.bound -= 0.05;
  c.v = c.v - Polynomial::constant(p.space, 0.05);
  c.x_free[s.program.gamma] -= 0.05;
  const auto r = verify_certificate(c, p, s);
  EXPECT_FALSE(r.passed());
}

TEST(RiskContour, ValuesStayBelowOneAndGridIsMonotone) {
  const auto p = load_problem(problem_path("cubic.json"));
  std::vector<Certificate> certs;
  for (int k = 1; k <= 3; ++k) {
    const auto s = solve_order(p, k, Variant::RiskContour);
    auto c = extract_certificate(s);
    EXPECT_LE(c.bound, 1.0 + 1e-6);
    c.report = verify_certificate(c, p, s);
    EXPECT_TRUE(c.report.passed()) << to_json(c.report).dump();
    certs.push_back(c);
  }
  const auto coarse = risk_grid({certs[0], certs[1]}, p, 11);
  const auto fine = risk_grid(certs, p, 11);
  ASSERT_EQ(coarse.values.size(), 121u);
  for (std::size_t i = 0; i < fine.values.size(); ++i) {
    EXPECT_LE(fine.values[i], coarse.values[i]);
    EXPECT_GE(fine.values[i], 0.0);
    EXPECT_LE(fine.values[i], 1.0);
  }
  // Row-major with the first state fastest.
  EXPECT_DOUBLE_EQ(fine.points.front()[0], -2.0);
  EXPECT_DOUBLE_EQ(fine.points.back()[1], 2.0);
  std::ostringstream csv;
  write_grid_csv(fine, csv);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "x1,x2,q,order");
  EXPECT_THROW(risk_grid({}, p, 11), std::invalid_argument);
}

TEST(RiskContour, PointBoundIsBelowRiskValue) {
  const auto p = load_problem(problem_path("cubic.json"));
  for (int k = 1; k <= 2; ++k) {
    const auto u = extract_certificate(solve_order(p, k, Variant::UnsafeBound));
    const auto r = extract_certificate(solve_order(p, k, Variant::RiskContour));
    EXPECT_LE(u.bound, r.v.evaluate(p.point(p.t0, *p.X0.center)) + 1e-3);
  }
}

TEST(Records, BoundRecordCarriesTheDocumentedFields) {
  const auto p = load_problem(problem_path("cubic.json"));
  const auto s = solve_order(p, 1, Variant::UnsafeBound);
  auto c = extract_certificate(s);
  c.report = verify_certificate(c, p, s);
  const auto j = bound_record(c, s);
  for (const char* key : {"order", "bound", "solver_status", "wall_time_s", "residuals"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["solver_status"], "Optimal");
  const auto cj = to_json(c);
  // The serialized v parses back to the same polynomial.
  EXPECT_EQ(parse_polynomial(cj["v"].get<std::string>(), p.space), c.v);
}
