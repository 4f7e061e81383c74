#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stochsafe/model.hpp"

namespace stochsafe::mc {

enum class InitialSampling { FixedPoint, Uniform, Grid };

struct SimConfig {
  /// Step in original time units; when unset, dt_scaled times the horizon. Ignored for maps.
  std::optional<double> dt;
  double dt_scaled = 1e-3;
  long n = 5000;
  std::uint64_t seed = 0;
  InitialSampling sampling = InitialSampling::FixedPoint;
  /// Overrides the initial set's center for FixedPoint.
  std::optional<std::vector<double>> x0;
  /// Number of initial points for Uniform / Grid sampling.
  int x0_count = 16;
  double tol = 1e-9;
  /// 0 picks the hardware concurrency.
  unsigned threads = 0;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<std::vector<double>> x;
  /// Step index of the first state in Xu, or -1.
  long hit_step = -1;
  bool exited = false;
  /// Last state inside X lies in Xu.
  bool terminal_hit = false;

  bool hit() const { return hit_step >= 0; }
};

/// Per-trajectory engine keyed by (seed, index), independent of scheduling.
std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t index);

/// Holds the problem's polynomials in a flat form for repeated evaluation.
class Simulator {
 public:
  explicit Simulator(const SafetyProblem& problem, double tol = 1e-9);

  /// Runs one trajectory from x0 until T or the first step outside X. With
  /// `record` false the run stops at the first hit and keeps no path.
  /// Throws std::invalid_argument if x0 is outside X.
  Trajectory run(std::span<const double> x0, double dt, std::mt19937_64& rng, bool record) const;

  /// Step actually used: dt for SDEs, the map's step otherwise.
  double step(double dt) const;

 private:
  struct Flat {
    struct Term {
      double coef;
      std::vector<std::pair<int, int>> powers;
    };
    std::vector<Term> terms;
    explicit Flat(const Polynomial& p);
    double operator()(const std::vector<double>& z) const;
  };
  struct FlatSet {
    std::vector<Flat> ineq, eq;
    explicit FlatSet(const BsaSet& s);
    bool contains(const std::vector<double>& z, double tol) const;
  };

  double t0_, T_;
  std::size_t dim_;
  std::vector<int> st_;
  int ti_;
  bool sde_;
  std::vector<Flat> drift_, map_;
  std::vector<std::vector<Flat>> diffusion_;
  int param_ = -1;
  double map_step_ = 1.0;
  FlatSet X_, Xu_;
  double tol_;
};

struct PointEstimate {
  std::vector<double> x0;
  long hits = 0;
  long terminal_hits = 0;
  long n = 0;
  double p_hat = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 1.0;
};

struct UnsafeEstimate {
  /// Figures of the initial point with the largest estimate.
  long hits = 0;
  long n = 0;
  double p_hat = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 1.0;
  double p_terminal = 0.0;
  std::uint64_t seed = 0;
  double dt = 0.0;
  std::vector<PointEstimate> per_x0;
};

/// Two-sided Clopper-Pearson interval for k successes in n trials.
std::pair<double, double> clopper_pearson(long k, long n, double confidence = 0.99);

/// Initial points for the configured sampling mode.
std::vector<std::vector<double>> initial_points(const SafetyProblem& problem, const SimConfig& cfg);

/// Ever-hit estimate, maximized over the initial points.
UnsafeEstimate estimate_unsafe(const SafetyProblem& problem, const SimConfig& cfg);

/// Header `t,x1,...,hit`; the hit column marks states in Xu.
void write_trajectory_csv(const SafetyProblem& problem, const Trajectory& tr, std::ostream& out);

nlohmann::json to_json(const UnsafeEstimate& e);

}  // namespace stochsafe::mc
