#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "stochsafe/model.hpp"

namespace stochsafe {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses a problem document:
///
///   {
///     "name": "cubic", "states": ["x1", "x2"], "time": "t", "parameters": ["lam"],
///     "t0": 0, "T": 5,
///     "generator": {"kind": "sde", "drift": ["..."], "diffusion": [["..."], ["..."]]}
///              or {"kind": "discrete", "map": ["..."], "step": 1, "parameter": "lam",
///                  "moments": "standard_normal" | [1, 0, 1, ...], "bracketing": "difference" | "literal"},
///     "X":  {"box": [[lo, hi], ...], "inequalities": ["..."], "equalities": ["..."], "radius": R},
///     "X0": {"center": [...], "radius": r0}  or  {"inequalities": [...], "equalities": [...]},
///     "Xu": {"inequalities": [...], "equalities": [...]},
///     "scaling": true
///   }
///
/// Box constraints are added to X as (hi - x)(x - lo) >= 0.
SafetyProblem parse_problem(const std::string& json_text);
SafetyProblem load_problem(const std::string& path);

/// Replaces a center/radius initial set's radius.
SafetyProblem with_initial_radius(const SafetyProblem& p, double r0);
SafetyProblem with_initial_point(const SafetyProblem& p, const std::vector<double>& x0);
SafetyProblem with_horizon(const SafetyProblem& p, double T);

}  // namespace stochsafe
