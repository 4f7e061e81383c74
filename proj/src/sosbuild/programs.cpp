#include <cmath>
#include <stdexcept>

#include "stochsafe/sos.hpp"

namespace stochsafe {

namespace {

Polynomial normalized(const Polynomial& g) {
  const double s = g.max_abs_coefficient();
  return s > 0.0 ? g * (1.0 / s) : g;
}

std::vector<Polynomial> normalized(const std::vector<Polynomial>& gs) {
  std::vector<Polynomial> out;
  for (const auto& g : gs) out.push_back(normalized(g));
  return out;
}

struct Sets {
  std::vector<Polynomial> x_ineq, x_eq, u_ineq, u_eq, i_ineq, i_eq;
};

Sets prepare_sets(const SafetyProblem& p) {
  const SpacePtr& sp = p.space;
  const int ti = sp->time_index();
  if (ti < 0) throw std::invalid_argument("the problem needs a time variable");
  Polynomial t = Polynomial::variable(sp, ti);
  Polynomial time_box = t * (Polynomial::constant(sp, 1.0) - t);

  Sets s;
  s.x_ineq = normalized(p.X.inequalities);
  // Archimedean ball over the scaled bounding box.
  const auto st = p.states();
  Polynomial ball = Polynomial::constant(sp, static_cast<double>(st.size()));
  for (int i : st) ball -= Polynomial::variable(sp, i).pow(2);
  s.x_ineq.push_back(normalized(ball));
  s.x_ineq.push_back(time_box);
  s.x_eq = normalized(p.X.equalities);
  s.u_ineq = normalized(p.Xu.inequalities);
  s.u_ineq.push_back(time_box);
  s.u_eq = normalized(p.Xu.equalities);
  s.i_ineq = normalized(p.X0.set.inequalities);
  s.i_eq = normalized(p.X0.set.equalities);
  return s;
}

AssembledProgram assemble(const SafetyProblem& p, int k, Variant variant, std::optional<std::vector<double>> mu0) {
  if (k < 1) throw std::invalid_argument("order must be at least 1");
  if (p.t0 != 0.0 || p.T != 1.0)
    throw std::invalid_argument("SOS programs are assembled over a scaled problem (t in [0, 1])");
  AssembledProgram a;
  a.variant = variant;
  a.order = k;
  a.space = p.space;
  const auto st = p.states();
  a.tx_vars = st;
  a.tx_vars.insert(a.tx_vars.begin(), p.space->time_index());
  const Sets sets = prepare_sets(p);

  a.v_basis = MonomialBasis(p.space, a.tx_vars, 2 * k);
  std::vector<Polynomial> monos;
  for (const auto& m : a.v_basis.monomials()) monos.push_back(Polynomial::monomial(p.space, m));
  a.lie_basis = apply_generator(p.generator, monos);
  int maxdeg = 0;
  for (const auto& lm : a.lie_basis) maxdeg = std::max(maxdeg, lm.degree());
  a.dynamics_degree = std::max(1, (maxdeg + 1) / 2);

  auto& sdp = a.sdp;
  const int ti = p.space->time_index();
  a.mu0_basis = MonomialBasis(p.space, st, 2 * k);
  if (variant == Variant::UnsafeBound) {
    a.gamma = sdp.add_free(1.0);
  } else {
    a.mu0 = mu0 ? *mu0 : uniform_box_moments(a.mu0_basis);
    if (a.mu0.size() != a.mu0_basis.size())
      throw std::invalid_argument("initial moments must cover every state monomial of degree <= 2k");
  }
  a.v_offset = sdp.num_free();
  for (std::size_t i = 0; i < a.v_basis.size(); ++i) {
    double cost = 0.0;
    const auto& m = a.v_basis[i];
    if (variant == Variant::RiskContour && m[static_cast<std::size_t>(ti)] == 0)
      cost = a.mu0[static_cast<std::size_t>(a.mu0_basis.find(m))];
    sdp.add_free(cost);
  }
  const int nv = static_cast<int>(a.v_basis.size());

  if (variant == Variant::UnsafeBound) {
    // gamma - v(0, x) on X0. A point X0 is substituted directly: the ideal of
    // a point leaves no interior for the dual moment matrix.
    const bool point = p.X0.center && p.X0.radius == 0.0;
    LinearPoly c{Polynomial(p.space), {}};
    c.terms.emplace_back(a.gamma, Polynomial::constant(p.space, 1.0));
    for (int i = 0; i < nv; ++i) {
      const auto& m = a.v_basis[static_cast<std::size_t>(i)];
      if (m[static_cast<std::size_t>(ti)] != 0) continue;
      if (point) {
        double val = 1.0;
        for (std::size_t j = 0; j < st.size(); ++j) val *= std::pow((*p.X0.center)[j], m[static_cast<std::size_t>(st[j])]);
        if (val != 0.0) c.terms.emplace_back(a.v_offset + i, Polynomial::constant(p.space, -val));
      } else {
        c.terms.emplace_back(a.v_offset + i, Polynomial::monomial(p.space, m, -1.0));
      }
    }
    if (point)
      a.constraints.push_back(wsos_constrain(sdp, "initial", c, {}, {}, {}, 0));
    else
      a.constraints.push_back(wsos_constrain(sdp, "initial", c, st, sets.i_ineq, sets.i_eq, 2 * k));
  }
  {
    LinearPoly c{Polynomial(p.space), {}};
    for (int i = 0; i < nv; ++i)
      if (!a.lie_basis[static_cast<std::size_t>(i)].is_zero())
        c.terms.emplace_back(a.v_offset + i, -a.lie_basis[static_cast<std::size_t>(i)]);
    a.constraints.push_back(
        wsos_constrain(sdp, "lie", c, a.tx_vars, sets.x_ineq, sets.x_eq, 2 * a.dynamics_degree));
  }
  LinearPoly vpoly{Polynomial(p.space), {}};
  for (int i = 0; i < nv; ++i)
    vpoly.terms.emplace_back(a.v_offset + i, Polynomial::monomial(p.space, a.v_basis[static_cast<std::size_t>(i)]));
  a.constraints.push_back(wsos_constrain(sdp, "nonneg", vpoly, a.tx_vars, sets.x_ineq, sets.x_eq, 2 * k));
  LinearPoly vm1 = vpoly;
  vm1.constant = Polynomial::constant(p.space, -1.0);
  a.constraints.push_back(wsos_constrain(sdp, "unsafe", vm1, a.tx_vars, sets.u_ineq, sets.u_eq, 2 * k));
  return a;
}

}  // namespace

const char* to_string(Variant v) { return v == Variant::UnsafeBound ? "unsafe_bound" : "risk_contour"; }

const WsosTemplate* AssembledProgram::find_constraint(const std::string& label) const {
  for (const auto& c : constraints)
    if (c.label == label) return &c;
  return nullptr;
}

const WsosTemplate& AssembledProgram::constraint(const std::string& label) const {
  const auto* c = find_constraint(label);
  if (!c) throw std::out_of_range("no constraint labelled " + label);
  return *c;
}

Polynomial AssembledProgram::v(const Eigen::VectorXd& x_free) const {
  Polynomial out(space);
  for (std::size_t i = 0; i < v_basis.size(); ++i) out.add_term(v_basis[i], x_free[v_offset + static_cast<int>(i)]);
  return out;
}

std::vector<double> uniform_box_moments(const MonomialBasis& basis) {
  std::vector<double> out;
  out.reserve(basis.size());
  for (const auto& m : basis.monomials()) {
    double v = 1.0;
    for (int var : basis.vars()) {
      const int e = m[static_cast<std::size_t>(var)];
      v *= (e % 2 == 0) ? 1.0 / (e + 1) : 0.0;
    }
    out.push_back(v);
  }
  return out;
}

std::size_t lie_gram_size(std::size_t num_states, int ktilde) {
  return binomial(static_cast<int>(num_states) + 1 + ktilde, ktilde);
}

AssembledProgram build_unsafe_sdp(const SafetyProblem& scaled, int k) {
  return assemble(scaled, k, Variant::UnsafeBound, std::nullopt);
}

AssembledProgram build_risk_sdp(const SafetyProblem& scaled, int k, std::optional<std::vector<double>> mu0) {
  return assemble(scaled, k, Variant::RiskContour, std::move(mu0));
}

}  // namespace stochsafe
