#include <random>

#include <gtest/gtest.h>

#include "stochsafe/config.hpp"
#include "stochsafe/parse.hpp"
#include "stochsafe/sos.hpp"

using namespace stochsafe;

namespace {

std::string problem_path(const char* name) { return std::string(STOCHSAFE_PROBLEMS_DIR) + "/" + name; }

Eigen::MatrixXd random_psd(int n, std::mt19937& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd L(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) L(i, j) = g(rng);
  return L * L.transpose();
}

}  // namespace

// The row residual of a WSOS constraint, read as a polynomial, must equal
// c - sigma_0 - sum sigma_i g_i - sum phi_j h_j evaluated pointwise.
TEST(Wsos, RowResidualIsThePutinarDefect) {
  const auto sp = VariableSpace::states({"x", "y"});
  sdp::BlockSdp sdp;
  const int a = sdp.add_free(0.0);
  LinearPoly c{parse_polynomial("1 + x^2*y", sp), {{a, parse_polynomial("x - y^2", sp)}}};
  const std::vector<Polynomial> g{parse_polynomial("1 - x^2 - y^2", sp), parse_polynomial("x", sp)};
  const std::vector<Polynomial> h{parse_polynomial("x*y - 0.25", sp)};
  const auto t = wsos_constrain(sdp, "test", c, {0, 1}, g, h, 4);
  ASSERT_EQ(t.grams.size(), 3u);

  std::mt19937 rng(11);
  std::vector<Eigen::MatrixXd> X;
  for (const auto& blk : sdp.blocks) X.push_back(random_psd(blk.dim, rng));
  Eigen::VectorXd xf = Eigen::VectorXd::Random(sdp.num_free());
  const Eigen::VectorXd res = sdp::primal_residual(sdp, X, xf);

  Polynomial defect(sp);
  for (std::size_t i = 0; i < t.rows.size(); ++i) defect.add_term(t.rows[i], res[t.first_row + static_cast<int>(i)]);

  std::uniform_real_distribution<double> u(-1, 1);
  for (int s = 0; s < 40; ++s) {
    const std::vector<double> z{u(rng), u(rng)};
    const double x = z[0], y = z[1];
    double expected = 1 + x * x * y + xf[a] * (x - y * y);
    for (const auto& slot : t.grams) {
      const Eigen::VectorXd m = slot.basis.evaluate(z);
      const double sigma = m.dot(X[static_cast<std::size_t>(slot.block)] * m);
      expected -= slot.multiplier < 0 ? sigma : sigma * g[static_cast<std::size_t>(slot.multiplier)].evaluate(z);
    }
    const auto& pb = t.phi_basis[0];
    const Eigen::VectorXd pm = pb.evaluate(z);
    double phi = 0;
    for (int p = 0; p < pm.size(); ++p) phi += xf[t.phi_offset[0] + p] * pm[p];
    expected -= phi * (x * y - 0.25);
    EXPECT_NEAR(defect.evaluate(z), expected, 1e-9 * (1 + std::abs(expected)));
    EXPECT_NEAR((c.evaluate(xf) - t.reconstruct(X, xf)).evaluate(z), expected, 1e-9 * (1 + std::abs(expected)));
  }
}

TEST(Wsos, RejectsTargetsAboveTheDegree) {
  const auto sp = VariableSpace::states({"x"});
  sdp::BlockSdp sdp;
  LinearPoly c{parse_polynomial("x^5", sp), {}};
  EXPECT_THROW(wsos_constrain(sdp, "bad", c, {0}, {}, {}, 4), std::invalid_argument);
}

TEST(Programs, BlockSizesFollowTheOrder) {
  const auto p = load_problem(problem_path("cubic.json"));
  const auto [q, rec] = scale_problem(p);
  for (int k = 1; k <= 3; ++k) {
    const auto a = build_unsafe_sdp(q, k);
    EXPECT_EQ(a.v_basis.size(), binomial(3 + 2 * k, 2 * k));
    EXPECT_EQ(a.dynamics_degree, k + 1);
    const auto& lie = a.constraint("lie");
    EXPECT_EQ(static_cast<std::size_t>(a.sdp.blocks[static_cast<std::size_t>(lie.grams[0].block)].dim),
              lie_gram_size(2, a.dynamics_degree));
    const auto& nn = a.constraint("nonneg");
    EXPECT_EQ(static_cast<std::size_t>(a.sdp.blocks[static_cast<std::size_t>(nn.grams[0].block)].dim),
              binomial(3 + k, k));
    // Point initial set: gamma - v(0, x0) is a scalar constraint.
    EXPECT_EQ(a.constraint("initial").rows.size(), 1u);
    EXPECT_NO_THROW(a.sdp.validate());
  }
}

TEST(Programs, RiskObjectiveIntegratesAgainstTheUniformMeasure) {
  const auto p = load_problem(problem_path("cubic.json"));
  const auto [q, rec] = scale_problem(p);
  const auto a = build_risk_sdp(q, 2);
  EXPECT_EQ(a.find_constraint("initial"), nullptr);
  // <x1^2 x2^2, U[-1,1]^2> = 1/9, <x1^3, .> = 0.
  const auto sp = q.space;
  MultiIndex m(sp->size());
  m[static_cast<std::size_t>(sp->index("x1"))] = 2;
  m[static_cast<std::size_t>(sp->index("x2"))] = 2;
  EXPECT_DOUBLE_EQ(a.sdp.c_free[a.v_offset + a.v_basis.find(m)], 1.0 / 9.0);
  m[static_cast<std::size_t>(sp->index("x2"))] = 0;
  m[static_cast<std::size_t>(sp->index("x1"))] = 3;
  EXPECT_DOUBLE_EQ(a.sdp.c_free[a.v_offset + a.v_basis.find(m)], 0.0);
  // Time-dependent monomials carry no cost.
  MultiIndex tm(sp->size());
  tm[static_cast<std::size_t>(sp->time_index())] = 1;
  EXPECT_DOUBLE_EQ(a.sdp.c_free[a.v_offset + a.v_basis.find(tm)], 0.0);
}

TEST(Programs, RequiresScaledProblems) {
  const auto p = load_problem(problem_path("cubic.json"));
  EXPECT_THROW(build_unsafe_sdp(p, 1), std::invalid_argument);
  const auto [q, rec] = scale_problem(p);
  EXPECT_THROW(build_unsafe_sdp(q, 0), std::invalid_argument);
}
