#include <algorithm>
#include <charconv>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "stochsafe/certify.hpp"

namespace stochsafe {

namespace {

std::string fmt(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, end) : std::string("nan");
}

}  // namespace

RiskGrid risk_grid(const std::vector<Certificate>& certs, const SafetyProblem& problem, int resolution,
                   std::optional<double> t) {
  if (certs.empty()) throw std::invalid_argument("risk grid needs at least one certificate");
  if (resolution < 2) throw std::invalid_argument("grid resolution must be at least 2");
  for (const auto& c : certs)
    if (c.variant != Variant::RiskContour) throw std::invalid_argument("risk grid needs risk-contour certificates");

  RiskGrid g;
  const auto st = problem.states();
  for (int i : st) g.state_names.push_back((*problem.space)[static_cast<std::size_t>(i)].name);
  const Box box = problem.bounding_box();
  const std::size_t n = st.size();
  g.resolution.assign(n, resolution);
  const double tt = t.value_or(problem.t0);

  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= static_cast<std::size_t>(resolution);
  std::vector<int> idx(n, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
      x[i] = box[i].first + (box[i].second - box[i].first) * idx[i] / (resolution - 1);
    const auto full = problem.point(tt, x);
    double best = std::numeric_limits<double>::infinity();
    int order = certs.front().order;
    for (const auto& c : certs) {
      const double v = c.v.evaluate(full);
      if (v < best) {
        best = v;
        order = c.order;
      }
    }
    g.points.push_back(std::move(x));
    g.values.push_back(std::clamp(best, 0.0, 1.0));
    g.orders.push_back(order);
    for (std::size_t i = 0; i < n; ++i) {
      if (++idx[i] < resolution) break;
      idx[i] = 0;
    }
  }
  return g;
}

void write_grid_csv(const RiskGrid& grid, std::ostream& out) {
  for (const auto& name : grid.state_names) out << name << ',';
  out << "q,order\n";
  for (std::size_t r = 0; r < grid.points.size(); ++r) {
    for (double x : grid.points[r]) out << fmt(x) << ',';
    out << fmt(grid.values[r]) << ',' << grid.orders[r] << '\n';
  }
}

}  // namespace stochsafe
