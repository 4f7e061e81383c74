#include <stdexcept>

#include "stochsafe/sos.hpp"

namespace stochsafe {

Polynomial LinearPoly::evaluate(const Eigen::VectorXd& x_free) const {
  Polynomial out = constant;
  for (const auto& [f, p] : terms) out += p * x_free[f];
  return out;
}

int WsosTemplate::row_of(const MultiIndex& m) const {
  const int i = rows.find(m);
  if (i < 0) throw std::invalid_argument(label + ": monomial outside the row basis");
  return first_row + i;
}

Polynomial WsosTemplate::reconstruct(const std::vector<Eigen::MatrixXd>& X, const Eigen::VectorXd& x_free) const {
  Polynomial out(rows.space());
  for (const auto& g : grams) {
    Polynomial s = gram_expand(X[static_cast<std::size_t>(g.block)], g.basis);
    if (g.multiplier < 0) out += s;
    else out += s * inequalities[static_cast<std::size_t>(g.multiplier)];
  }
  for (std::size_t j = 0; j < equalities.size(); ++j) {
    if (phi_offset[j] < 0) continue;
    Polynomial phi(rows.space());
    const auto& b = phi_basis[j];
    for (std::size_t p = 0; p < b.size(); ++p) phi.add_term(b[p], x_free[phi_offset[j] + static_cast<int>(p)]);
    out += phi * equalities[j];
  }
  return out;
}

namespace {

void add_gram(sdp::BlockSdp& sdp, WsosTemplate& t, int half_degree, int multiplier) {
  const SpacePtr& space = t.rows.space();
  GramSlot slot;
  slot.basis = MonomialBasis(space, t.vars, half_degree);
  slot.multiplier = multiplier;
  const int s = static_cast<int>(slot.basis.size());
  slot.block = sdp.add_block(s);

  // Hankel selectors: one atom per monomial of degree <= 2 * half_degree.
  MonomialBasis sq(space, t.vars, 2 * half_degree);
  std::vector<sdp::SparseSym> atoms(sq.size());
  for (int p = 0; p < s; ++p)
    for (int q = p; q < s; ++q) {
      const int beta = sq.find(slot.basis[static_cast<std::size_t>(p)] + slot.basis[static_cast<std::size_t>(q)]);
      atoms[static_cast<std::size_t>(beta)].push_back({p, q, 1.0});
    }
  for (auto& a : atoms) sdp.add_atom(slot.block, std::move(a));

  if (multiplier < 0) {
    for (std::size_t beta = 0; beta < sq.size(); ++beta) sdp.couple(t.row_of(sq[beta]), slot.block, static_cast<int>(beta), 1.0);
  } else {
    const auto& g = t.inequalities[static_cast<std::size_t>(multiplier)];
    for (std::size_t beta = 0; beta < sq.size(); ++beta)
      for (const auto& [gm, gc] : g.terms()) sdp.couple(t.row_of(sq[beta] + gm), slot.block, static_cast<int>(beta), gc);
  }
  t.grams.push_back(std::move(slot));
}

void check_member(const Polynomial& p, const WsosTemplate& t, const char* what) {
  if (!p.uses_only(t.vars)) throw std::invalid_argument(t.label + ": " + what + " uses variables outside the constraint");
  if (p.degree() > t.degree) throw std::invalid_argument(t.label + ": " + what + " exceeds the degree bound");
}

}  // namespace

WsosTemplate wsos_constrain(sdp::BlockSdp& sdp, std::string label, const LinearPoly& c, std::vector<int> vars,
                            std::vector<Polynomial> inequalities, std::vector<Polynomial> equalities, int degree) {
  if (degree < 0) throw std::invalid_argument("degree bound must be nonnegative");
  WsosTemplate t;
  t.label = std::move(label);
  t.vars = std::move(vars);
  t.degree = degree;
  t.inequalities = std::move(inequalities);
  t.equalities = std::move(equalities);
  t.target = c;
  const SpacePtr& space = c.constant.space();
  t.rows = MonomialBasis(space, t.vars, degree);

  check_member(c.constant, t, "target");
  for (const auto& [f, p] : c.terms) check_member(p, t, "target");
  for (const auto& g : t.inequalities)
    if (!g.uses_only(t.vars)) throw std::invalid_argument(t.label + ": inequality uses variables outside the constraint");
  for (const auto& h : t.equalities)
    if (!h.uses_only(t.vars)) throw std::invalid_argument(t.label + ": equality uses variables outside the constraint");

  t.first_row = sdp.num_rows();
  for (std::size_t i = 0; i < t.rows.size(); ++i) sdp.add_row(0.0);
  for (const auto& [m, v] : c.constant.terms()) sdp.b[t.row_of(m)] += v;
  for (const auto& [f, p] : c.terms)
    for (const auto& [m, v] : p.terms()) sdp.add_free_entry(t.row_of(m), f, -v);

  add_gram(sdp, t, degree / 2, -1);
  for (std::size_t i = 0; i < t.inequalities.size(); ++i) {
    const int room = degree - t.inequalities[i].degree();
    if (room < 0) continue;
    add_gram(sdp, t, room / 2, static_cast<int>(i));
  }
  for (const auto& h : t.equalities) {
    const int room = degree - h.degree();
    if (room < 0) {
      t.phi_offset.push_back(-1);
      t.phi_basis.emplace_back();
      continue;
    }
    MonomialBasis b(space, t.vars, room);
    const int offset = sdp.num_free();
    for (std::size_t p = 0; p < b.size(); ++p) {
      const int var = sdp.add_free(0.0);
      for (const auto& [hm, hc] : h.terms()) sdp.add_free_entry(t.row_of(b[p] + hm), var, hc);
    }
    t.phi_offset.push_back(offset);
    t.phi_basis.push_back(std::move(b));
  }
  return t;
}

}  // namespace stochsafe
