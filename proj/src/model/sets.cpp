#include <cmath>
#include <stdexcept>

#include "stochsafe/model.hpp"

namespace stochsafe {

bool membership(const BsaSet& set, std::span<const double> point, double tol) {
  for (const auto& g : set.inequalities)
    if (g.evaluate(point) < -tol) return false;
  for (const auto& h : set.equalities)
    if (std::abs(h.evaluate(point)) > tol) return false;
  return true;
}

bool ScalingRecord::is_identity() const {
  for (std::size_t i = 0; i < center.size(); ++i)
    if (center[i] != 0.0 || radius[i] != 1.0) return false;
  return t0 == 0.0 && horizon == 1.0;
}

std::vector<double> ScalingRecord::to_scaled(std::span<const double> x) const {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - center[i]) / radius[i];
  return y;
}

std::vector<double> ScalingRecord::from_scaled(std::span<const double> y) const {
  std::vector<double> x(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) x[i] = center[i] + radius[i] * y[i];
  return x;
}

Box SafetyProblem::bounding_box() const {
  if (box) return *box;
  if (X.radius) {
    const double r = std::sqrt(*X.radius);
    return Box(num_states(), {-r, r});
  }
  throw std::invalid_argument("no bounding box for X: give an explicit box or an archimedean radius");
}

std::vector<double> SafetyProblem::point(double t, std::span<const double> x) const {
  std::vector<double> p(space->size(), 0.0);
  if (space->time_index() >= 0) p[static_cast<std::size_t>(space->time_index())] = t;
  const auto st = states();
  if (x.size() != st.size()) throw std::invalid_argument("state dimension mismatch");
  for (std::size_t i = 0; i < st.size(); ++i) p[static_cast<std::size_t>(st[i])] = x[i];
  return p;
}

InitialSet make_initial_set(const SpacePtr& space, const std::vector<double>& center, double radius) {
  const auto st = space->state_indices();
  if (center.size() != st.size()) throw std::invalid_argument("initial center has the wrong dimension");
  if (radius < 0.0) throw std::invalid_argument("initial radius must be nonnegative");
  InitialSet s;
  s.center = center;
  s.radius = radius;
  if (radius == 0.0) {
    for (std::size_t i = 0; i < st.size(); ++i)
      s.set.equalities.push_back(Polynomial::variable(space, st[i]) - Polynomial::constant(space, center[i]));
  } else {
    Polynomial g = Polynomial::constant(space, radius * radius);
    for (std::size_t i = 0; i < st.size(); ++i) {
      Polynomial d = Polynomial::variable(space, st[i]) - Polynomial::constant(space, center[i]);
      g -= d * d;
    }
    s.set.inequalities.push_back(std::move(g));
  }
  return s;
}

}  // namespace stochsafe
