#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <boost/random/sobol.hpp>
#include <nlohmann/json.hpp>

#include "stochsafe/certify.hpp"

namespace stochsafe {

namespace {

/// Points of a scrambled-free Sobol sequence mapped into a box.
class BoxSampler {
 public:
  BoxSampler(std::vector<std::pair<double, double>> box, unsigned skip)
      : box_(std::move(box)), gen_(static_cast<std::size_t>(std::max<std::size_t>(box_.size(), 1))) {
    if (skip > 0) gen_.discard(static_cast<boost::uintmax_t>(skip) * box_.size());
  }

  std::vector<double> next() {
    std::vector<double> out(box_.size());
    for (std::size_t i = 0; i < box_.size(); ++i) {
      const double u = static_cast<double>(gen_()) * 0x1p-64;
      out[i] = box_[i].first + u * (box_[i].second - box_[i].first);
    }
    return out;
  }

 private:
  std::vector<std::pair<double, double>> box_;
  boost::random::sobol gen_;
};

/// Draws points of [t0, T] x box whose state part satisfies `accept`, giving
/// up after a fixed multiple of the requested count.
template <class Accept>
std::vector<std::vector<double>> sample(const SafetyProblem& p, const Box& box, int count, unsigned seed,
                                        Accept&& accept) {
  std::vector<std::pair<double, double>> cube{{p.t0, p.T}};
  cube.insert(cube.end(), box.begin(), box.end());
  BoxSampler s(cube, seed);
  std::vector<std::vector<double>> out;
  const long limit = 64L * count;
  for (long tries = 0; tries < limit && static_cast<int>(out.size()) < count; ++tries) {
    auto u = s.next();
    std::vector<double> x(u.begin() + 1, u.end());
    auto full = p.point(u[0], x);
    if (accept(full)) out.push_back(std::move(full));
  }
  return out;
}

template <class Value>
ConstraintCheck check(std::string name, const std::vector<std::vector<double>>& pts, Value&& violation) {
  ConstraintCheck c;
  c.name = std::move(name);
  c.samples = static_cast<int>(pts.size());
  c.worst = pts.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
  for (const auto& x : pts) c.worst = std::max(c.worst, violation(x));
  return c;
}

}  // namespace

SolvedOrder solve_order(const SafetyProblem& problem, int k, Variant variant, const sdp::SolverOptions& opts,
                        std::optional<std::vector<double>> mu0) {
  SolvedOrder s;
  auto [scaled, rec] = scale_problem(problem);
  s.scaled = std::move(scaled);
  s.record = std::move(rec);
  const auto start = std::chrono::steady_clock::now();
  s.program = variant == Variant::UnsafeBound ? build_unsafe_sdp(s.scaled, k) : build_risk_sdp(s.scaled, k, std::move(mu0));
  s.solution = sdp::solve(s.program.sdp, opts);
  s.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return s;
}

bool VerificationReport::samples_pass() const {
  return std::all_of(checks.begin(), checks.end(), [&](const ConstraintCheck& c) { return c.worst <= tolerance; });
}

bool VerificationReport::wsos_pass() const {
  return std::all_of(wsos.begin(), wsos.end(), [&](const WsosResidual& w) { return w.residual <= tolerance; });
}

Certificate extract_certificate(const SolvedOrder& solved, bool allow_inexact) {
  const auto& sol = solved.solution;
  const bool has_iterate = sol.status == sdp::SolveStatus::Optimal || sol.status == sdp::SolveStatus::NumericalTrouble ||
                           sol.status == sdp::SolveStatus::MaxIterations;
  if (sol.status != sdp::SolveStatus::Optimal && !(allow_inexact && has_iterate))
    throw CertificateError(std::string("solver returned ") + sdp::to_string(sol.status));
  const auto& prog = solved.program;
  Certificate c;
  c.order = prog.order;
  c.variant = prog.variant;
  c.status = sol.status;
  c.x_free = sol.x_free;
  c.grams = sol.X;
  c.v_scaled = prog.v(sol.x_free);
  c.v = unscale(c.v_scaled, solved.record, solved.scaled);
  if (prog.variant == Variant::UnsafeBound) {
    c.bound = sol.x_free[prog.gamma];
  } else {
    // <v(0, .), mu0> over the scaled box.
    const int ti = prog.space->time_index();
    double b = 0.0;
    for (std::size_t i = 0; i < prog.v_basis.size(); ++i) {
      const auto& m = prog.v_basis[i];
      if (m[static_cast<std::size_t>(ti)] != 0) continue;
      b += sol.x_free[prog.v_offset + static_cast<int>(i)] * prog.mu0[static_cast<std::size_t>(prog.mu0_basis.find(m))];
    }
    c.bound = b;
  }
  return c;
}

VerificationReport verify_certificate(const Certificate& cert, const SafetyProblem& problem, const SolvedOrder& solved,
                                      const VerifyOptions& opts) {
  VerificationReport r;
  r.tolerance = opts.tolerance;
  const Box box = problem.bounding_box();
  const auto in_x = [&](const std::vector<double>& x) { return membership(problem.X, x, 0.0); };
  const auto in_xu = [&](const std::vector<double>& x) { return membership(problem.Xu, x, 0.0); };

  const auto xs = sample(problem, box, opts.samples, opts.seed, in_x);
  r.checks.push_back(check("nonneg", xs, [&](const auto& x) { return -cert.v.evaluate(x); }));
  const auto us = sample(problem, box, opts.samples, opts.seed, in_xu);
  r.checks.push_back(check("unsafe", us, [&](const auto& x) { return 1.0 - cert.v.evaluate(x); }));
  // The program certifies the generator in scaled coordinates, which carries the unit horizon.
  const Polynomial lv = apply_generator(solved.scaled.generator, cert.v_scaled);
  const auto st = problem.states();
  const int ti = problem.space->time_index();
  r.checks.push_back(check("lie", xs, [&](const auto& x) {
    std::vector<double> xo(st.size());
    for (std::size_t i = 0; i < st.size(); ++i) xo[i] = x[static_cast<std::size_t>(st[i])];
    const auto xs_ = solved.record.to_scaled(xo);
    auto y = solved.scaled.point(solved.record.time_to_scaled(x[static_cast<std::size_t>(ti)]), xs_);
    return lv.evaluate(y);
  }));

  if (cert.variant == Variant::UnsafeBound) {
    std::vector<std::vector<double>> init;
    if (problem.X0.center && problem.X0.radius == 0.0) {
      init.push_back(problem.point(problem.t0, *problem.X0.center));
    } else {
      Box b0 = box;
      if (problem.X0.center)
        for (std::size_t i = 0; i < b0.size(); ++i)
          b0[i] = {(*problem.X0.center)[i] - problem.X0.radius, (*problem.X0.center)[i] + problem.X0.radius};
      for (auto x : sample(problem, b0, opts.samples, opts.seed, [&](const auto& x) { return membership(problem.X0.set, x, 0.0); })) {
        x[static_cast<std::size_t>(ti)] = problem.t0;
        init.push_back(std::move(x));
      }
    }
    r.checks.push_back(check("initial", init, [&](const auto& x) { return cert.v.evaluate(x) - cert.bound; }));
  }

  // WSOS identities in the coordinates they were assembled in.
  const auto& sp = solved.program.space;
  for (const auto& t : solved.program.constraints) {
    WsosResidual w;
    w.label = t.label;
    const Polynomial target = t.target.evaluate(cert.x_free);
    const Polynomial diff = target - t.reconstruct(cert.grams, cert.x_free);
    w.scale = 1.0 + target.max_abs_coefficient();
    std::vector<std::pair<double, double>> cube;
    for (int v : t.vars) cube.push_back(v == ti ? std::make_pair(0.0, 1.0) : std::make_pair(-1.0, 1.0));
    BoxSampler s(cube, opts.seed);
    double worst = 0.0;
    for (int i = 0; i < opts.wsos_points; ++i) {
      const auto u = s.next();
      std::vector<double> full(sp->size(), 0.0);
      for (std::size_t j = 0; j < t.vars.size(); ++j) full[static_cast<std::size_t>(t.vars[j])] = u[j];
      worst = std::max(worst, std::abs(diff.evaluate(full)));
    }
    w.residual = worst / w.scale;
    r.wsos.push_back(w);
  }

  r.min_gram_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& X : cert.grams) {
    if (X.rows() == 0) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X, Eigen::EigenvaluesOnly);
    r.min_gram_eigenvalue = std::min(r.min_gram_eigenvalue, es.eigenvalues().minCoeff());
  }
  return r;
}

double MomentDiagnostics::max_residual() const {
  double m = 0.0;
  for (double r : liouville_residual) m = std::max(m, std::abs(r));
  return m;
}

MomentDiagnostics moment_diagnostics(const SolvedOrder& solved) {
  const auto& prog = solved.program;
  const auto& y = solved.solution.y;
  if (y.size() != prog.sdp.num_rows()) throw CertificateError("solution carries no dual vector");
  const auto& sp = prog.space;
  const int ti = sp->time_index();
  // Pseudo-moment of monomial m under the measure dual to constraint t.
  const auto moment = [&](const WsosTemplate& t, const MultiIndex& m) {
    const int i = t.rows.find(m);
    if (i < 0) throw CertificateError(t.label + ": monomial outside the moment basis");
    return -y[t.first_row + i];
  };
  const auto integrate = [&](const WsosTemplate& t, const Polynomial& p) {
    double s = 0.0;
    for (const auto& [m, c] : p.terms()) s += c * moment(t, m);
    return s;
  };
  const auto& lie = prog.constraint("lie");
  const auto& nonneg = prog.constraint("nonneg");
  const auto& unsafe = prog.constraint("unsafe");
  const WsosTemplate* init = prog.find_constraint("initial");

  // <m(0, .), mu0>: from the initial measure, or from the fixed moments.
  const auto initial_moment = [&](const MultiIndex& m) {
    if (init) {
      if (init->vars.empty()) {
        const auto& c = *solved.scaled.X0.center;
        const auto st = solved.scaled.states();
        double val = 1.0;
        for (std::size_t j = 0; j < st.size(); ++j) val *= std::pow(c[j], m[static_cast<std::size_t>(st[j])]);
        return val * moment(*init, MultiIndex(sp->size()));
      }
      return moment(*init, m);
    }
    return prog.mu0[static_cast<std::size_t>(prog.mu0_basis.find(m))];
  };

  MomentDiagnostics d;
  const MultiIndex one(sp->size());
  d.mass_initial = init ? initial_moment(one) : prog.mu0[static_cast<std::size_t>(prog.mu0_basis.find(one))];
  d.mass_terminal = moment(nonneg, one) + moment(unsafe, one);
  d.mass_occupation = moment(lie, one);
  d.mass_occupation_original = d.mass_occupation * solved.record.horizon;
  for (std::size_t i = 0; i < prog.v_basis.size(); ++i) {
    const auto& m = prog.v_basis[i];
    double r = moment(nonneg, m) + moment(unsafe, m) - integrate(lie, prog.lie_basis[i]);
    if (m[static_cast<std::size_t>(ti)] == 0) r -= initial_moment(m);
    d.monomials.push_back(m);
    d.liouville_residual.push_back(r);
  }
  return d;
}

nlohmann::json to_json(const VerificationReport& r) {
  nlohmann::json j;
  j["tolerance"] = r.tolerance;
  j["passed"] = r.passed();
  for (const auto& c : r.checks) j["checks"].push_back({{"name", c.name}, {"samples", c.samples}, {"worst_violation", c.worst}});
  for (const auto& w : r.wsos) j["wsos"].push_back({{"label", w.label}, {"residual", w.residual}, {"scale", w.scale}});
  j["min_gram_eigenvalue"] = r.min_gram_eigenvalue;
  return j;
}

nlohmann::json to_json(const Certificate& c) {
  nlohmann::json j;
  j["order"] = c.order;
  j["variant"] = to_string(c.variant);
  j["solver_status"] = sdp::to_string(c.status);
  j["bound"] = c.bound;
  j["v"] = c.v.to_string();
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [m, coef] : c.v.terms()) terms.push_back({{"exponents", m.exponents()}, {"coefficient", coef}});
  j["v_terms"] = terms;
  std::vector<std::string> names;
  for (const auto& var : c.v.space()->variables()) names.push_back(var.name);
  j["variables"] = names;
  j["verification"] = to_json(c.report);
  return j;
}

nlohmann::json to_json(const MomentDiagnostics& d) {
  nlohmann::json j;
  j["mass_initial"] = d.mass_initial;
  j["mass_terminal"] = d.mass_terminal;
  j["mass_occupation"] = d.mass_occupation;
  j["mass_occupation_original"] = d.mass_occupation_original;
  j["max_liouville_residual"] = d.max_residual();
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < d.monomials.size(); ++i)
    rows.push_back({{"exponents", d.monomials[i].exponents()}, {"residual", d.liouville_residual[i]}});
  j["liouville"] = rows;
  return j;
}

nlohmann::json bound_record(const Certificate& c, const SolvedOrder& solved) {
  nlohmann::json j;
  j["order"] = c.order;
  j["bound"] = c.bound;
  j["solver_status"] = sdp::to_string(solved.solution.status);
  j["wall_time_s"] = solved.wall_time_s;
  nlohmann::json res;
  res["relative_gap"] = solved.solution.relative_gap;
  res["primal_infeasibility"] = solved.solution.primal_infeasibility;
  res["dual_infeasibility"] = solved.solution.dual_infeasibility;
  double wsos = 0.0;
  for (const auto& w : c.report.wsos) wsos = std::max(wsos, w.residual);
  res["wsos"] = wsos;
  double sampled = -std::numeric_limits<double>::infinity();
  for (const auto& ch : c.report.checks) sampled = std::max(sampled, ch.worst);
  res["worst_sample_violation"] = sampled;
  res["verified"] = c.report.passed();
  j["residuals"] = res;
  return j;
}

}  // namespace stochsafe
