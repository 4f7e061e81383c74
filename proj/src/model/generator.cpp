#include <algorithm>
#include <stdexcept>

#include "stochsafe/model.hpp"

namespace stochsafe {

namespace {

void check_test_function(const Polynomial& v) {
  if (!v.space()) return;
  for (int idx : v.space()->parameter_indices())
    if (v.degree_of(idx) > 0) throw std::invalid_argument("generator: test function depends on a parameter");
}

struct SdeKernel {
  const SdeGenerator& gen;
  SpacePtr space;
  std::vector<int> st;
  // a(i, j) = (g g')_{ij}
  std::vector<std::vector<Polynomial>> a;

  SdeKernel(const SdeGenerator& g, SpacePtr sp) : gen(g), space(std::move(sp)), st(space->state_indices()) {
    const std::size_t n = st.size();
    if (g.drift.size() != n) throw std::invalid_argument("drift dimension does not match the state count");
    if (g.diffusion.size() != n && !g.diffusion.empty())
      throw std::invalid_argument("diffusion row count does not match the state count");
    a.assign(n, std::vector<Polynomial>(n, Polynomial(space)));
    if (g.diffusion.empty()) return;
    const std::size_t m = g.diffusion[0].size();
    for (const auto& row : g.diffusion)
      if (row.size() != m) throw std::invalid_argument("diffusion rows differ in length");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t c = 0; c < m; ++c) a[i][j] += g.diffusion[i][c] * g.diffusion[j][c];
  }

  Polynomial apply(const Polynomial& v) const {
    check_test_function(v);
    Polynomial out(space);
    if (space->time_index() >= 0) out += differentiate(v, space->time_index());
    const std::size_t n = st.size();
    std::vector<Polynomial> grad;
    grad.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      grad.push_back(differentiate(v, st[i]));
      if (!grad.back().is_zero()) out += gen.drift[i] * grad.back();
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (grad[i].is_zero()) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (a[i][j].is_zero()) continue;
        Polynomial h = differentiate(grad[i], st[j]);
        if (!h.is_zero()) out += (a[i][j] * h) * 0.5;
      }
    }
    return out;
  }
};

struct DiscreteKernel {
  const DiscreteGenerator& gen;
  SpacePtr space;
  Substitution sub;

  DiscreteKernel(const DiscreteGenerator& g, SpacePtr sp) : gen(g), space(sp), sub(sp) {
    const auto st = space->state_indices();
    if (g.map.size() != st.size()) throw std::invalid_argument("map dimension does not match the state count");
    if (!(g.step > 0.0)) throw std::invalid_argument("discrete step must be positive");
    if (space->time_index() >= 0)
      sub.set(space->time_index(),
              Polynomial::variable(space, space->time_index()) + Polynomial::constant(space, g.step));
    for (std::size_t i = 0; i < st.size(); ++i) sub.set(st[i], g.map[i]);
  }

  Polynomial apply(const Polynomial& v) const {
    check_test_function(v);
    Polynomial next = sub.apply(v);
    if (gen.parameter >= 0) next = expect_parameter(next, gen.parameter, gen.moments);
    const double inv = 1.0 / gen.step;
    if (gen.bracketing == Bracketing::Difference) return (next - v) * inv;
    return next * inv - v;
  }
};

}  // namespace

std::vector<double> standard_normal_moments(int max_order) {
  std::vector<double> m(static_cast<std::size_t>(max_order) + 1, 0.0);
  m[0] = 1.0;
  for (int j = 2; j <= max_order; j += 2) m[static_cast<std::size_t>(j)] = m[static_cast<std::size_t>(j - 2)] * (j - 1);
  return m;
}

std::vector<Polynomial> apply_generator(const Generator& gen, const std::vector<Polynomial>& vs) {
  std::vector<Polynomial> out;
  if (vs.empty()) return out;
  const SpacePtr space = vs.front().space();
  out.reserve(vs.size());
  if (const auto* sde = std::get_if<SdeGenerator>(&gen)) {
    SdeKernel k(*sde, space);
    for (const auto& v : vs) out.push_back(k.apply(v));
  } else {
    DiscreteKernel k(std::get<DiscreteGenerator>(gen), space);
    for (const auto& v : vs) out.push_back(k.apply(v));
  }
  return out;
}

Polynomial apply_generator(const Generator& gen, const Polynomial& v) {
  return apply_generator(gen, std::vector<Polynomial>{v}).front();
}

int dynamics_degree(const Generator& gen, const SpacePtr& space, int k) {
  if (k < 1) throw std::invalid_argument("order must be at least 1");
  std::vector<int> vars = space->state_indices();
  if (space->time_index() >= 0) vars.insert(vars.begin(), space->time_index());
  MonomialBasis basis(space, vars, 2 * k);
  std::vector<Polynomial> ms;
  ms.reserve(basis.size());
  for (const auto& m : basis.monomials()) ms.push_back(Polynomial::monomial(space, m));
  int maxdeg = 0;
  for (const auto& lm : apply_generator(gen, ms)) maxdeg = std::max(maxdeg, lm.degree());
  return (maxdeg + 1) / 2;
}

}  // namespace stochsafe
