#include <cmath>
#include <stdexcept>

#include "stochsafe/model.hpp"

namespace stochsafe {

namespace {

BsaSet map_set(const BsaSet& s, const Substitution& sub) {
  BsaSet out;
  for (const auto& g : s.inequalities) out.inequalities.push_back(sub.apply(g));
  for (const auto& h : s.equalities) out.equalities.push_back(sub.apply(h));
  out.radius = s.radius;
  return out;
}

}  // namespace

std::pair<SafetyProblem, ScalingRecord> scale_problem(const SafetyProblem& p) {
  if (!(p.T > p.t0)) throw std::invalid_argument("horizon must satisfy t0 < T");
  const auto st = p.states();
  const std::size_t n = st.size();
  ScalingRecord rec;
  rec.center.assign(n, 0.0);
  rec.radius.assign(n, 1.0);
  if (!p.scale) {
    rec.t0 = 0.0;
    rec.horizon = 1.0;
    SafetyProblem q = p;
    return {q, rec};
  }
  const Box box = p.bounding_box();
  if (box.size() != n) throw std::invalid_argument("bounding box dimension mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    const auto [lo, hi] = box[i];
    if (!(hi > lo)) throw std::invalid_argument("degenerate bounding box");
    rec.center[i] = 0.5 * (lo + hi);
    rec.radius[i] = 0.5 * (hi - lo);
  }
  rec.t0 = p.t0;
  rec.horizon = p.T - p.t0;

  const SpacePtr& sp = p.space;
  Substitution sub(sp);
  const int ti = sp->time_index();
  if (ti >= 0)
    sub.set(ti, Polynomial::constant(sp, rec.t0) + Polynomial::variable(sp, ti) * rec.horizon);
  for (std::size_t i = 0; i < n; ++i)
    sub.set(st[i], Polynomial::constant(sp, rec.center[i]) + Polynomial::variable(sp, st[i]) * rec.radius[i]);

  SafetyProblem q;
  q.name = p.name;
  q.space = sp;
  q.scale = p.scale;
  q.X = map_set(p.X, sub);
  q.X.radius = static_cast<double>(n);
  q.Xu = map_set(p.Xu, sub);
  q.Xu.radius.reset();
  q.X0.set = map_set(p.X0.set, sub);
  q.X0.set.radius.reset();
  if (p.X0.center) {
    q.X0.center = rec.to_scaled(*p.X0.center);
    q.X0.radius = p.X0.radius / rec.radius[0];
  }
  q.t0 = 0.0;
  q.T = 1.0;
  q.box = Box(n, {-1.0, 1.0});

  if (const auto* sde = std::get_if<SdeGenerator>(&p.generator)) {
    SdeGenerator g;
    for (std::size_t i = 0; i < n; ++i) {
      g.drift.push_back(sub.apply(sde->drift[i]) * (rec.horizon / rec.radius[i]));
      std::vector<Polynomial> row;
      if (i < sde->diffusion.size())
        for (const auto& e : sde->diffusion[i]) row.push_back(sub.apply(e) * (std::sqrt(rec.horizon) / rec.radius[i]));
      g.diffusion.push_back(std::move(row));
    }
    if (sde->diffusion.empty()) g.diffusion.clear();
    q.generator = std::move(g);
  } else {
    const auto& d = std::get<DiscreteGenerator>(p.generator);
    DiscreteGenerator g = d;
    g.map.clear();
    for (std::size_t i = 0; i < n; ++i)
      g.map.push_back((sub.apply(d.map[i]) - Polynomial::constant(sp, rec.center[i])) * (1.0 / rec.radius[i]));
    g.step = d.step / rec.horizon;
    q.generator = std::move(g);
  }
  return {q, rec};
}

Polynomial unscale(const Polynomial& scaled, const ScalingRecord& rec, const SafetyProblem& original) {
  const SpacePtr& sp = original.space;
  Substitution sub(sp);
  const int ti = sp->time_index();
  if (ti >= 0)
    sub.set(ti, (Polynomial::variable(sp, ti) - Polynomial::constant(sp, rec.t0)) * (1.0 / rec.horizon));
  const auto st = original.states();
  for (std::size_t i = 0; i < st.size(); ++i)
    sub.set(st[i],
            (Polynomial::variable(sp, st[i]) - Polynomial::constant(sp, rec.center[i])) * (1.0 / rec.radius[i]));
  return sub.apply(scaled);
}

}  // namespace stochsafe
