#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "stochsafe/mcsim.hpp"

namespace stochsafe::mc {

std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

Simulator::Flat::Flat(const Polynomial& p) {
  for (const auto& [m, c] : p.terms()) {
    Term t{c, {}};
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i] > 0) t.powers.emplace_back(static_cast<int>(i), m[i]);
    terms.push_back(std::move(t));
  }
}

double Simulator::Flat::operator()(const std::vector<double>& z) const {
  double s = 0.0;
  for (const auto& t : terms) {
    double v = t.coef;
    for (const auto& [var, e] : t.powers) {
      const double b = z[static_cast<std::size_t>(var)];
      double pw = b;
      for (int k = 1; k < e; ++k) pw *= b;
      v *= pw;
    }
    s += v;
  }
  return s;
}

Simulator::FlatSet::FlatSet(const BsaSet& s) {
  for (const auto& g : s.inequalities) ineq.emplace_back(g);
  for (const auto& h : s.equalities) eq.emplace_back(h);
}

bool Simulator::FlatSet::contains(const std::vector<double>& z, double tol) const {
  for (const auto& g : ineq)
    if (g(z) < -tol) return false;
  for (const auto& h : eq)
    if (std::abs(h(z)) > tol) return false;
  return true;
}

namespace {

bool is_standard_normal(const std::vector<double>& moments) {
  if (moments.empty()) return false;
  const auto ref = standard_normal_moments(static_cast<int>(moments.size()) - 1);
  for (std::size_t i = 0; i < moments.size(); ++i)
    if (std::abs(moments[i] - ref[i]) > 1e-12 * std::max(1.0, ref[i])) return false;
  return true;
}

}  // namespace

Simulator::Simulator(const SafetyProblem& problem, double tol)
    : t0_(problem.t0),
      T_(problem.T),
      dim_(problem.space->size()),
      st_(problem.states()),
      ti_(problem.space->time_index()),
      sde_(problem.is_sde()),
      X_(problem.X),
      Xu_(problem.Xu),
      tol_(tol) {
  if (!(T_ > t0_)) throw std::invalid_argument("horizon must satisfy t0 < T");
  if (const auto* g = std::get_if<SdeGenerator>(&problem.generator)) {
    for (const auto& f : g->drift) drift_.emplace_back(f);
    for (const auto& row : g->diffusion) {
      diffusion_.emplace_back();
      for (const auto& e : row) diffusion_.back().emplace_back(e);
    }
  } else {
    const auto& d = std::get<DiscreteGenerator>(problem.generator);
    for (const auto& f : d.map) map_.emplace_back(f);
    map_step_ = d.step;
    param_ = d.parameter;
    if (param_ >= 0 && !is_standard_normal(d.moments))
      throw std::invalid_argument("simulation supports standard-normal map parameters only");
  }
}

double Simulator::step(double dt) const { return sde_ ? dt : map_step_; }

Trajectory Simulator::run(std::span<const double> x0, double dt, std::mt19937_64& rng, bool record) const {
  if (x0.size() != st_.size()) throw std::invalid_argument("initial state has the wrong dimension");
  if (sde_ && !(dt > 0.0)) throw std::invalid_argument("step size must be positive");
  std::vector<double> z(dim_, 0.0);
  for (std::size_t i = 0; i < st_.size(); ++i) z[static_cast<std::size_t>(st_[i])] = x0[i];
  double t = t0_;
  if (ti_ >= 0) z[static_cast<std::size_t>(ti_)] = t;
  if (!X_.contains(z, tol_)) throw std::invalid_argument("initial state lies outside X");

  const double span = T_ - t0_;
  long steps;
  double h;
  if (sde_) {
    steps = std::max(1L, std::lround(span / dt));
    h = span / static_cast<double>(steps);
  } else {
    h = map_step_;
    steps = static_cast<long>(std::floor(span / h + 1e-9));
  }
  const double sqrt_h = std::sqrt(h);
  std::normal_distribution<double> normal;

  Trajectory tr;
  const auto keep = [&] {
    if (!record) return;
    tr.t.push_back(t);
    std::vector<double> x(st_.size());
    for (std::size_t i = 0; i < st_.size(); ++i) x[i] = z[static_cast<std::size_t>(st_[i])];
    tr.x.push_back(std::move(x));
  };
  keep();
  bool in_u = Xu_.contains(z, tol_);
  if (in_u) tr.hit_step = 0;

  std::vector<double> next(st_.size());
  std::vector<double> noise;
  for (long j = 1; j <= steps && (record || !tr.hit()); ++j) {
    if (sde_) {
      const std::size_t m = diffusion_.empty() ? 0 : diffusion_[0].size();
      noise.resize(m);
      for (auto& w : noise) w = sqrt_h * normal(rng);
      for (std::size_t i = 0; i < st_.size(); ++i) {
        double dx = drift_[i](z) * h;
        if (i < diffusion_.size())
          for (std::size_t c = 0; c < m; ++c) dx += diffusion_[i][c](z) * noise[c];
        next[i] = z[static_cast<std::size_t>(st_[i])] + dx;
      }
    } else {
      if (param_ >= 0) z[static_cast<std::size_t>(param_)] = normal(rng);
      for (std::size_t i = 0; i < st_.size(); ++i) next[i] = map_[i](z);
      if (param_ >= 0) z[static_cast<std::size_t>(param_)] = 0.0;
    }
    for (std::size_t i = 0; i < st_.size(); ++i) z[static_cast<std::size_t>(st_[i])] = next[i];
    t = t0_ + static_cast<double>(j) * h;
    if (ti_ >= 0) z[static_cast<std::size_t>(ti_)] = t;
    // Leaving X stops the process before the state can count as a hit.
    if (!X_.contains(z, tol_)) {
      tr.exited = true;
      keep();
      break;
    }
    keep();
    in_u = Xu_.contains(z, tol_);
    if (in_u && !tr.hit()) tr.hit_step = j;
  }
  tr.terminal_hit = in_u;
  return tr;
}

void write_trajectory_csv(const SafetyProblem& problem, const Trajectory& tr, std::ostream& out) {
  const auto st = problem.states();
  out << 't';
  for (int i : st) out << ',' << (*problem.space)[static_cast<std::size_t>(i)].name;
  out << ",hit\n";
  char buf[32];
  const auto put = [&](double v) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, end - buf);
  };
  for (std::size_t r = 0; r < tr.t.size(); ++r) {
    put(tr.t[r]);
    const auto z = problem.point(tr.t[r], tr.x[r]);
    for (double x : tr.x[r]) {
      out << ',';
      put(x);
    }
    out << ',' << (membership(problem.Xu, z) && !(tr.exited && r + 1 == tr.t.size()) ? 1 : 0) << '\n';
  }
}

}  // namespace stochsafe::mc
