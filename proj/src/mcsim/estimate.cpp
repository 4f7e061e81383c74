#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <boost/math/distributions/beta.hpp>
#include <nlohmann/json.hpp>

#include "stochsafe/mcsim.hpp"

namespace stochsafe::mc {

std::pair<double, double> clopper_pearson(long k, long n, double confidence) {
  if (n < 1 || k < 0 || k > n) throw std::invalid_argument("need 0 <= k <= n and n >= 1");
  const double alpha = 1.0 - confidence;
  const double kk = static_cast<double>(k), nn = static_cast<double>(n);
  const double lo = k == 0 ? 0.0 : boost::math::quantile(boost::math::beta_distribution<>(kk, nn - kk + 1), alpha / 2);
  const double hi = k == n ? 1.0 : boost::math::quantile(boost::math::beta_distribution<>(kk + 1, nn - kk), 1 - alpha / 2);
  return {lo, hi};
}

namespace {

Box initial_box(const SafetyProblem& p) {
  if (p.X0.center) {
    Box b;
    for (double c : *p.X0.center) b.emplace_back(c - p.X0.radius, c + p.X0.radius);
    return b;
  }
  return p.bounding_box();
}

bool in_initial(const SafetyProblem& p, const std::vector<double>& x) {
  return membership(p.X0.set, p.point(p.t0, x), 1e-9) && membership(p.X, p.point(p.t0, x), 1e-9);
}

}  // namespace

std::vector<std::vector<double>> initial_points(const SafetyProblem& p, const SimConfig& cfg) {
  if (cfg.sampling == InitialSampling::FixedPoint || (p.X0.center && p.X0.radius == 0.0)) {
    if (cfg.x0) return {*cfg.x0};
    if (!p.X0.center) throw std::invalid_argument("fixed-point sampling needs an initial point");
    return {*p.X0.center};
  }
  if (cfg.x0_count < 1) throw std::invalid_argument("need at least one initial point");
  const Box box = initial_box(p);
  const std::size_t n = box.size();
  std::vector<std::vector<double>> out;
  if (cfg.sampling == InitialSampling::Grid) {
    // Refine a tensor grid until enough of it falls inside X0.
    for (int res = 2; res <= 4096 && static_cast<int>(out.size()) < cfg.x0_count; res *= 2) {
      out.clear();
      long total = 1;
      for (std::size_t i = 0; i < n; ++i) total *= res;
      std::vector<int> idx(n, 0);
      for (long f = 0; f < total; ++f) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = box[i].first + (box[i].second - box[i].first) * idx[i] / (res - 1);
        if (in_initial(p, x)) out.push_back(std::move(x));
        for (std::size_t i = 0; i < n; ++i) {
          if (++idx[i] < res) break;
          idx[i] = 0;
        }
      }
    }
  } else {
    auto rng = trajectory_rng(cfg.seed, ~std::uint64_t{0});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (long tries = 0; tries < 10000L * cfg.x0_count && static_cast<int>(out.size()) < cfg.x0_count; ++tries) {
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = box[i].first + (box[i].second - box[i].first) * u(rng);
      if (in_initial(p, x)) out.push_back(std::move(x));
    }
  }
  if (out.empty()) throw std::invalid_argument("no initial points found inside X0");
  return out;
}

UnsafeEstimate estimate_unsafe(const SafetyProblem& problem, const SimConfig& cfg) {
  if (cfg.n < 1) throw std::invalid_argument("trajectory count must be positive");
  const double dt = cfg.dt.value_or(cfg.dt_scaled * (problem.T - problem.t0));
  if (!(dt > 0.0)) throw std::invalid_argument("step size must be positive");
  const Simulator sim(problem, cfg.tol);
  const auto x0s = initial_points(problem, cfg);

  const long n = cfg.n;
  const std::size_t jobs = x0s.size() * static_cast<std::size_t>(n);
  std::vector<unsigned char> hit(jobs), term(jobs);
  unsigned workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, jobs));
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t j = w; j < jobs; j += workers) {
          auto rng = trajectory_rng(cfg.seed, j);
          const auto tr = sim.run(x0s[j / static_cast<std::size_t>(n)], dt, rng, false);
          hit[j] = tr.hit();
          term[j] = tr.terminal_hit;
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  UnsafeEstimate e;
  e.seed = cfg.seed;
  e.dt = sim.step(dt);
  std::size_t best = 0;
  for (std::size_t i = 0; i < x0s.size(); ++i) {
    PointEstimate pe;
    pe.x0 = x0s[i];
    pe.n = n;
    for (long j = 0; j < n; ++j) {
      pe.hits += hit[i * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
      pe.terminal_hits += term[i * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
    }
    pe.p_hat = static_cast<double>(pe.hits) / static_cast<double>(n);
    pe.se = std::sqrt(pe.p_hat * (1 - pe.p_hat) / static_cast<double>(n));
    std::tie(pe.ci_lo, pe.ci_hi) = clopper_pearson(pe.hits, n);
    if (i == 0 || pe.hits > e.per_x0[best].hits) best = i;
    e.per_x0.push_back(std::move(pe));
  }
  const auto& b = e.per_x0[best];
  e.hits = b.hits;
  e.n = b.n;
  e.p_hat = b.p_hat;
  e.se = b.se;
  e.ci_lo = b.ci_lo;
  e.ci_hi = b.ci_hi;
  e.p_terminal = static_cast<double>(b.terminal_hits) / static_cast<double>(n);
  return e;
}

nlohmann::json to_json(const UnsafeEstimate& e) {
  nlohmann::json j;
  j["p_hat"] = e.p_hat;
  j["ci_lo"] = e.ci_lo;
  j["ci_hi"] = e.ci_hi;
  j["N"] = e.n;
  j["seed"] = e.seed;
  j["hits"] = e.hits;
  j["se"] = e.se;
  j["p_terminal"] = e.p_terminal;
  j["dt"] = e.dt;
  if (e.per_x0.size() > 1) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& p : e.per_x0) rows.push_back({{"x0", p.x0}, {"hits", p.hits}, {"p_hat", p.p_hat}, {"ci_lo", p.ci_lo}, {"ci_hi", p.ci_hi}});
    j["per_x0"] = rows;
  }
  return j;
}

}  // namespace stochsafe::mc
