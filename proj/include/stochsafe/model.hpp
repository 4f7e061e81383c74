#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "stochsafe/polynomial.hpp"

namespace stochsafe {

/// {x : g_i(x) >= 0, h_j(x) = 0}.
struct BsaSet {
  std::vector<Polynomial> inequalities;
  std::vector<Polynomial> equalities;
  /// Squared-norm bound R (the set lies in ||x||^2 <= R) when known.
  std::optional<double> radius;

  bool empty_description() const { return inequalities.empty() && equalities.empty(); }
};

/// Point coordinates are over the full variable space of the polynomials.
bool membership(const BsaSet& set, std::span<const double> point, double tol = 1e-9);

struct SdeGenerator {
  std::vector<Polynomial> drift;                   // n
  std::vector<std::vector<Polynomial>> diffusion;  // n x m
};

enum class Bracketing {
  /// (E[v(t + dt, f)] - v) / dt
  Difference,
  /// E[v(t + dt, f)] / dt - v
  Literal,
};

struct DiscreteGenerator {
  std::vector<Polynomial> map;  // n, over (t, x, lambda)
  double step = 1.0;
  int parameter = -1;  // index of lambda in the space, -1 when deterministic
  std::vector<double> moments{1.0};
  Bracketing bracketing = Bracketing::Difference;
};

using Generator = std::variant<SdeGenerator, DiscreteGenerator>;

/// Raw moments E[l^j], j = 0..max_order, of the standard normal.
std::vector<double> standard_normal_moments(int max_order);

/// Generator applied to v(t, x).
Polynomial apply_generator(const Generator& gen, const Polynomial& v);

/// Applies the generator to many test functions, sharing the composition caches.
std::vector<Polynomial> apply_generator(const Generator& gen, const std::vector<Polynomial>& vs);

/// Affine coordinates y = (x - center) / radius, s = (t - t0) / horizon.
struct ScalingRecord {
  std::vector<double> center;
  std::vector<double> radius;
  double t0 = 0.0;
  double horizon = 1.0;

  bool is_identity() const;
  /// Original state -> scaled state.
  std::vector<double> to_scaled(std::span<const double> x) const;
  std::vector<double> from_scaled(std::span<const double> y) const;
  double time_to_scaled(double t) const { return (t - t0) / horizon; }
};

/// One axis-aligned interval per state.
using Box = std::vector<std::pair<double, double>>;

struct InitialSet {
  BsaSet set;
  /// Present for point / disk initial sets.
  std::optional<std::vector<double>> center;
  double radius = 0.0;
};

struct SafetyProblem {
  std::string name;
  SpacePtr space;
  BsaSet X;
  InitialSet X0;
  BsaSet Xu;
  double t0 = 0.0;
  double T = 1.0;
  Generator generator;
  /// Explicit bounding box of X, when given.
  std::optional<Box> box;
  /// Solve in normalized coordinates.
  bool scale = true;

  std::vector<int> states() const { return space->state_indices(); }
  std::size_t num_states() const { return space->num_states(); }
  bool is_sde() const { return std::holds_alternative<SdeGenerator>(generator); }

  /// Box from the explicit box, else from the radius. Throws std::invalid_argument.
  Box bounding_box() const;
  /// Full-space coordinate vector at (t, x) with parameters zero.
  std::vector<double> point(double t, std::span<const double> x) const;
};

/// k~ = ceil(max deg(L m) / 2) over monomials m in (t, x) of degree <= 2k.
int dynamics_degree(const Generator& gen, const SpacePtr& space, int k);

/// Maps X into [-1, 1]^n and [t0, T] into [0, 1].
std::pair<SafetyProblem, ScalingRecord> scale_problem(const SafetyProblem& p);

/// Composes a scaled-coordinate polynomial with the inverse map, giving it in
/// original coordinates. `scaled` and the result share `original`'s space.
Polynomial unscale(const Polynomial& scaled, const ScalingRecord& rec, const SafetyProblem& original);

/// Builds the initial set for a center and radius: equalities for r = 0, a disk otherwise.
InitialSet make_initial_set(const SpacePtr& space, const std::vector<double>& center, double radius);

}  // namespace stochsafe
