#include "stochsafe/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stochsafe/parse.hpp"

namespace stochsafe {

namespace {

using nlohmann::json;

Polynomial poly(const json& j, const SpacePtr& space, const std::string& where) {
  if (!j.is_string() && !j.is_number()) throw ConfigError(where + ": expected a polynomial string");
  const std::string text = j.is_string() ? j.get<std::string>() : j.dump();
  try {
    return parse_polynomial(text, space);
  } catch (const ParseError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

std::vector<Polynomial> poly_list(const json& parent, const char* key, const SpacePtr& space,
                                  const std::string& where) {
  std::vector<Polynomial> out;
  if (!parent.contains(key)) return out;
  const auto& arr = parent.at(key);
  if (!arr.is_array()) throw ConfigError(where + "." + key + ": expected an array");
  for (std::size_t i = 0; i < arr.size(); ++i)
    out.push_back(poly(arr[i], space, where + "." + key + "[" + std::to_string(i) + "]"));
  return out;
}

void require_state_only(const BsaSet& s, const SafetyProblem& p, const std::string& where) {
  const auto st = p.states();
  for (const auto& g : s.inequalities)
    if (!g.uses_only(st)) throw ConfigError(where + ": constraints may only use state variables");
  for (const auto& h : s.equalities)
    if (!h.uses_only(st)) throw ConfigError(where + ": constraints may only use state variables");
}

BsaSet parse_set(const json& j, const SafetyProblem& p, const std::string& where) {
  BsaSet s;
  s.inequalities = poly_list(j, "inequalities", p.space, where);
  s.equalities = poly_list(j, "equalities", p.space, where);
  if (j.contains("radius") && !j.at("radius").is_null()) {
    const double r = j.at("radius").get<double>();
    if (!(r > 0.0)) throw ConfigError(where + ".radius: must be positive");
    s.radius = r;
  }
  require_state_only(s, p, where);
  return s;
}

}  // namespace

SafetyProblem parse_problem(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  try {
    SafetyProblem p;
    p.name = j.value("name", std::string("problem"));
    std::vector<VariableSpace::Variable> vars;
    const std::string tname = j.value("time", std::string("t"));
    vars.push_back({tname, VarRole::Time});
    if (!j.contains("states") || j.at("states").empty()) throw ConfigError("states: at least one state is required");
    for (const auto& s : j.at("states")) vars.push_back({s.get<std::string>(), VarRole::State});
    if (j.contains("parameters"))
      for (const auto& s : j.at("parameters")) vars.push_back({s.get<std::string>(), VarRole::Parameter});
    try {
      p.space = std::make_shared<const VariableSpace>(vars);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("variables: ") + e.what());
    }
    p.t0 = j.value("t0", 0.0);
    p.T = j.at("T").get<double>();
    if (!(p.T > p.t0)) throw ConfigError("T must exceed t0");
    p.scale = j.value("scaling", true);
    const std::size_t n = p.num_states();

    const auto& g = j.at("generator");
    const std::string kind = g.at("kind").get<std::string>();
    if (kind == "sde") {
      SdeGenerator sde;
      sde.drift = poly_list(g, "drift", p.space, "generator");
      if (sde.drift.size() != n) throw ConfigError("generator.drift: needs one entry per state");
      if (g.contains("diffusion")) {
        const auto& rows = g.at("diffusion");
        if (rows.size() != n) throw ConfigError("generator.diffusion: needs one row per state");
        std::size_t m = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
          std::vector<Polynomial> row;
          const std::string w = "generator.diffusion[" + std::to_string(i) + "]";
          if (rows[i].is_array()) {
            for (const auto& e : rows[i]) row.push_back(poly(e, p.space, w));
          } else {
            row.push_back(poly(rows[i], p.space, w));
          }
          if (i == 0) m = row.size();
          if (row.size() != m) throw ConfigError("generator.diffusion: rows differ in length");
          sde.diffusion.push_back(std::move(row));
        }
      }
      for (const auto& f : sde.drift)
        for (int idx : p.space->parameter_indices())
          if (f.degree_of(idx) > 0) throw ConfigError("generator.drift: parameters are not allowed in an SDE");
      p.generator = std::move(sde);
    } else if (kind == "discrete") {
      DiscreteGenerator d;
      d.map = poly_list(g, "map", p.space, "generator");
      if (d.map.size() != n) throw ConfigError("generator.map: needs one entry per state");
      d.step = g.value("step", 1.0);
      if (!(d.step > 0.0)) throw ConfigError("generator.step: must be positive");
      if (g.contains("parameter")) {
        const std::string pname = g.at("parameter").get<std::string>();
        d.parameter = p.space->find(pname);
        if (d.parameter < 0 || (*p.space)[static_cast<std::size_t>(d.parameter)].role != VarRole::Parameter)
          throw ConfigError("generator.parameter: '" + pname + "' is not a declared parameter");
        const auto& mom = g.at("moments");
        if (mom.is_string()) {
          if (mom.get<std::string>() != "standard_normal")
            throw ConfigError("generator.moments: unknown distribution '" + mom.get<std::string>() + "'");
          d.moments = standard_normal_moments(96);
        } else {
          d.moments = mom.get<std::vector<double>>();
          if (d.moments.empty() || d.moments[0] != 1.0) throw ConfigError("generator.moments: m0 must be 1");
        }
      }
      const std::string br = g.value("bracketing", std::string("difference"));
      if (br == "difference") d.bracketing = Bracketing::Difference;
      else if (br == "literal") d.bracketing = Bracketing::Literal;
      else throw ConfigError("generator.bracketing: expected 'difference' or 'literal'");
      p.generator = std::move(d);
    } else {
      throw ConfigError("generator.kind: expected 'sde' or 'discrete'");
    }

    const auto& jx = j.at("X");
    p.X = parse_set(jx, p, "X");
    if (jx.contains("box")) {
      Box box;
      for (const auto& iv : jx.at("box")) {
        const auto pr = iv.get<std::vector<double>>();
        if (pr.size() != 2 || !(pr[1] > pr[0])) throw ConfigError("X.box: each entry must be [lo, hi] with lo < hi");
        box.emplace_back(pr[0], pr[1]);
      }
      if (box.size() != n) throw ConfigError("X.box: needs one interval per state");
      const auto st = p.states();
      for (std::size_t i = 0; i < n; ++i) {
        Polynomial x = Polynomial::variable(p.space, st[i]);
        p.X.inequalities.push_back((Polynomial::constant(p.space, box[i].second) - x) *
                                   (x - Polynomial::constant(p.space, box[i].first)));
      }
      p.box = std::move(box);
    }
    if (!p.box && !p.X.radius) throw ConfigError("X: give a box or an archimedean radius");

    const auto& j0 = j.at("X0");
    if (j0.contains("center")) {
      const auto c = j0.at("center").get<std::vector<double>>();
      if (c.size() != n) throw ConfigError("X0.center: wrong dimension");
      const double r = j0.value("radius", 0.0);
      if (r < 0.0) throw ConfigError("X0.radius: must be nonnegative");
      p.X0 = make_initial_set(p.space, c, r);
    } else {
      p.X0.set = parse_set(j0, p, "X0");
    }
    if (p.X0.set.empty_description()) throw ConfigError("X0: empty description");
    p.Xu = parse_set(j.at("Xu"), p, "Xu");
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

SafetyProblem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_problem(ss.str());
}

SafetyProblem with_initial_radius(const SafetyProblem& p, double r0) {
  if (!p.X0.center) throw ConfigError("--r0 needs an initial set given by center and radius");
  SafetyProblem q = p;
  q.X0 = make_initial_set(p.space, *p.X0.center, r0);
  return q;
}

SafetyProblem with_initial_point(const SafetyProblem& p, const std::vector<double>& x0) {
  if (x0.size() != p.num_states()) throw ConfigError("--x0 has the wrong dimension");
  SafetyProblem q = p;
  q.X0 = make_initial_set(p.space, x0, p.X0.center ? p.X0.radius : 0.0);
  return q;
}

SafetyProblem with_horizon(const SafetyProblem& p, double T) {
  if (!(T > p.t0)) throw ConfigError("--T must exceed t0");
  SafetyProblem q = p;
  q.T = T;
  return q;
}

}  // namespace stochsafe
