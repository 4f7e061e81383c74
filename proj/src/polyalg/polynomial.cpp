#include "stochsafe/polynomial.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>

namespace stochsafe {

// ---------------------------------------------------------------- VariableSpace

VariableSpace::VariableSpace(std::vector<Variable> vars) : vars_(std::move(vars)) {
  std::set<std::string> seen;
  int first_state = -1;
  int last_state = -1;
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    const auto& v = vars_[i];
    if (v.name.empty()) throw std::invalid_argument("empty variable name");
    if (!seen.insert(v.name).second)
      throw std::invalid_argument("duplicate variable name '" + v.name + "'");
    if (v.role == VarRole::Time) {
      if (time_index_ >= 0) throw std::invalid_argument("more than one time variable");
      time_index_ = static_cast<int>(i);
    } else if (v.role == VarRole::State) {
      if (first_state < 0) first_state = static_cast<int>(i);
      if (last_state >= 0 && last_state != static_cast<int>(i) - 1)
        throw std::invalid_argument("state variables must be contiguous");
      last_state = static_cast<int>(i);
    }
  }
}

std::shared_ptr<const VariableSpace> VariableSpace::states(const std::vector<std::string>& names) {
  std::vector<Variable> vars;
  for (const auto& n : names) vars.push_back({n, VarRole::State});
  return std::make_shared<const VariableSpace>(std::move(vars));
}

int VariableSpace::find(std::string_view name) const {
  for (std::size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].name == name) return static_cast<int>(i);
  return -1;
}

int VariableSpace::index(std::string_view name) const {
  int i = find(name);
  if (i < 0) throw std::invalid_argument("unknown variable '" + std::string(name) + "'");
  return i;
}

std::vector<int> VariableSpace::state_indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].role == VarRole::State) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> VariableSpace::parameter_indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].role == VarRole::Parameter) out.push_back(static_cast<int>(i));
  return out;
}

std::size_t VariableSpace::num_states() const { return state_indices().size(); }

bool VariableSpace::operator==(const VariableSpace& other) const {
  if (vars_.size() != other.vars_.size()) return false;
  for (std::size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].name != other.vars_[i].name || vars_[i].role != other.vars_[i].role) return false;
  return true;
}

// ---------------------------------------------------------------- MultiIndex

int MultiIndex::degree() const { return std::accumulate(exps_.begin(), exps_.end(), 0); }

int MultiIndex::degree_in(std::span<const int> vars) const {
  int d = 0;
  for (int v : vars) d += exps_[static_cast<std::size_t>(v)];
  return d;
}

MultiIndex MultiIndex::operator+(const MultiIndex& o) const {
  MultiIndex r(*this);
  for (std::size_t i = 0; i < exps_.size(); ++i) r.exps_[i] += o.exps_[i];
  return r;
}

MultiIndex MultiIndex::operator-(const MultiIndex& o) const {
  MultiIndex r(*this);
  for (std::size_t i = 0; i < exps_.size(); ++i) r.exps_[i] -= o.exps_[i];
  return r;
}

bool MultiIndex::divides(const MultiIndex& o) const {
  for (std::size_t i = 0; i < exps_.size(); ++i)
    if (exps_[i] > o.exps_[i]) return false;
  return true;
}

bool GrlexLess::operator()(const MultiIndex& a, const MultiIndex& b) const {
  const int da = a.degree();
  const int db = b.degree();
  if (da != db) return da < db;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return a[i] > b[i];
  return false;
}

std::size_t MultiIndexHash::operator()(const MultiIndex& m) const noexcept {
  std::size_t h = 0xcbf29ce484222325ULL;
  for (int e : m.exponents()) {
    h ^= static_cast<std::size_t>(e) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

// ---------------------------------------------------------------- Polynomial

Polynomial Polynomial::constant(SpacePtr space, double c) {
  Polynomial p(space);
  p.add_term(MultiIndex(space->size()), c);
  return p;
}

Polynomial Polynomial::variable(SpacePtr space, int var_index) {
  MultiIndex m(space->size());
  m[static_cast<std::size_t>(var_index)] = 1;
  return monomial(std::move(space), m, 1.0);
}

Polynomial Polynomial::monomial(SpacePtr space, const MultiIndex& m, double coef) {
  Polynomial p(std::move(space));
  p.add_term(m, coef);
  return p;
}

int Polynomial::degree() const { return terms_.empty() ? 0 : terms_.rbegin()->first.degree(); }

int Polynomial::degree_in(std::span<const int> vars) const {
  int d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, m.degree_in(vars));
  return d;
}

int Polynomial::degree_of(int var) const {
  int d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, m[static_cast<std::size_t>(var)]);
  return d;
}

double Polynomial::coefficient(const MultiIndex& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::max_abs_coefficient() const {
  double r = 0.0;
  for (const auto& [m, c] : terms_) r = std::max(r, std::abs(c));
  return r;
}

bool Polynomial::uses_only(std::span<const int> vars) const {
  std::vector<bool> allowed(space_ ? space_->size() : 0, false);
  for (int v : vars) allowed[static_cast<std::size_t>(v)] = true;
  for (const auto& [m, c] : terms_)
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i] != 0 && !allowed[i]) return false;
  return true;
}

void Polynomial::add_term(const MultiIndex& m, double c) {
  if (c == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(m, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

double Polynomial::evaluate(std::span<const double> point) const {
  double s = 0.0;
  for (const auto& [m, c] : terms_) {
    double v = c;
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (int e = 0; e < m[i]; ++e) v *= point[i];
    }
    s += v;
  }
  return s;
}

void Polynomial::check_space(const Polynomial& o) const {
  if (space_ == o.space_) return;
  if (!space_ || !o.space_ || !(*space_ == *o.space_))
    throw std::invalid_argument("polynomials live over different variable spaces");
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  Polynomial r(*this);
  r += o;
  return r;
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
  Polynomial r(*this);
  r -= o;
  return r;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  check_space(o);
  for (const auto& [m, c] : o.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  check_space(o);
  for (const auto& [m, c] : o.terms_) add_term(m, -c);
  return *this;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
  check_space(o);
  Polynomial r(space_);
  for (const auto& [ma, ca] : terms_)
    for (const auto& [mb, cb] : o.terms_) r.add_term(ma + mb, ca * cb);
  return r;
}

Polynomial Polynomial::operator*(double s) const {
  Polynomial r(space_);
  if (s == 0.0) return r;
  for (const auto& [m, c] : terms_) r.add_term(m, c * s);
  return r;
}

Polynomial Polynomial::pow(int e) const {
  if (e < 0) throw std::invalid_argument("negative exponent");
  Polynomial r = constant(space_, 1.0);
  for (int i = 0; i < e; ++i) r = r * (*this);
  return r;
}

bool Polynomial::operator==(const Polynomial& o) const {
  if (space_ != o.space_ && !(space_ && o.space_ && *space_ == *o.space_)) return false;
  return terms_ == o.terms_;
}

namespace {

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : terms_) {
    const bool neg = c < 0;
    const double a = std::abs(c);
    if (first) {
      if (neg) out += "-";
    } else {
      out += neg ? " - " : " + ";
    }
    first = false;
    std::string mono;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] == 0) continue;
      if (!mono.empty()) mono += "*";
      mono += (*space_)[i].name;
      if (m[i] > 1) mono += "^" + std::to_string(m[i]);
    }
    if (mono.empty()) {
      out += format_number(a);
    } else if (a == 1.0) {
      out += mono;
    } else {
      out += format_number(a) + "*" + mono;
    }
  }
  return out;
}

Polynomial add(const Polynomial& p, const Polynomial& q) { return p + q; }
Polynomial sub(const Polynomial& p, const Polynomial& q) { return p - q; }
Polynomial mul(const Polynomial& p, const Polynomial& q) { return p * q; }
Polynomial scale(const Polynomial& p, double s) { return p * s; }

Polynomial differentiate(const Polynomial& p, int var) {
  if (!p.space() || var < 0 || static_cast<std::size_t>(var) >= p.space()->size())
    throw std::invalid_argument("differentiate: variable index out of range");
  Polynomial r(p.space());
  const auto v = static_cast<std::size_t>(var);
  for (const auto& [m, c] : p.terms()) {
    if (m[v] == 0) continue;
    MultiIndex d(m);
    d[v] -= 1;
    r.add_term(d, c * m[v]);
  }
  return r;
}

Polynomial differentiate(const Polynomial& p, std::string_view var) {
  return differentiate(p, p.space()->index(var));
}

// ---------------------------------------------------------------- Substitution

Substitution::Substitution(SpacePtr space)
    : space_(std::move(space)), images_(space_->size()), powers_(space_->size()) {}

Substitution& Substitution::set(int var, Polynomial image) {
  if (image.space() != space_ && !(image.space() && *image.space() == *space_))
    throw std::invalid_argument("substitution image over an incompatible variable space");
  images_.at(static_cast<std::size_t>(var)) = std::make_unique<Polynomial>(std::move(image));
  powers_[static_cast<std::size_t>(var)].clear();
  return *this;
}

Substitution& Substitution::set(std::string_view var, Polynomial image) {
  return set(space_->index(var), std::move(image));
}

const Polynomial& Substitution::power(int var, int e) const {
  auto& cache = powers_[static_cast<std::size_t>(var)];
  if (cache.empty()) cache.push_back(Polynomial::constant(space_, 1.0));
  while (static_cast<int>(cache.size()) <= e) cache.push_back(cache.back() * *images_[static_cast<std::size_t>(var)]);
  return cache[static_cast<std::size_t>(e)];
}

Polynomial Substitution::apply(const Polynomial& p) const {
  if (p.space() != space_ && !(p.space() && *p.space() == *space_))
    throw std::invalid_argument("compose: polynomial over an incompatible variable space");
  Polynomial r(space_);
  const std::size_t n = space_->size();
  for (const auto& [m, c] : p.terms()) {
    // Untouched variables stay as a monomial factor.
    MultiIndex kept(n);
    Polynomial prod = Polynomial::constant(space_, c);
    for (std::size_t i = 0; i < n; ++i) {
      if (m[i] == 0) continue;
      if (images_[i]) {
        prod = prod * power(static_cast<int>(i), m[i]);
      } else {
        kept[i] = m[i];
      }
    }
    for (const auto& [pm, pc] : prod.terms()) r.add_term(pm + kept, pc);
  }
  return r;
}

Polynomial compose(const Polynomial& p, const std::map<std::string, Polynomial>& subst) {
  Substitution s(p.space());
  for (const auto& [name, image] : subst) s.set(name, image);
  return s.apply(p);
}

Polynomial expect_parameter(const Polynomial& p, int var, std::span<const double> moments) {
  const auto v = static_cast<std::size_t>(var);
  Polynomial r(p.space());
  for (const auto& [m, c] : p.terms()) {
    const int j = m[v];
    if (static_cast<std::size_t>(j) >= moments.size())
      throw std::out_of_range("expect_parameter: moment of order " + std::to_string(j) +
                              " not provided");
    MultiIndex reduced(m);
    reduced[v] = 0;
    r.add_term(reduced, c * moments[static_cast<std::size_t>(j)]);
  }
  return r;
}

Polynomial expect_parameter(const Polynomial& p, std::string_view var,
                            std::span<const double> moments) {
  return expect_parameter(p, p.space()->index(var), moments);
}

// ---------------------------------------------------------------- MonomialBasis

namespace {

void enumerate_degree(const std::vector<int>& vars, std::size_t pos, int remaining,
                      MultiIndex& cur, std::vector<MultiIndex>& out) {
  if (pos + 1 == vars.size()) {
    cur[static_cast<std::size_t>(vars[pos])] = remaining;
    out.push_back(cur);
    cur[static_cast<std::size_t>(vars[pos])] = 0;
    return;
  }
  // Largest leading exponent first gives grlex order within the degree.
  for (int e = remaining; e >= 0; --e) {
    cur[static_cast<std::size_t>(vars[pos])] = e;
    enumerate_degree(vars, pos + 1, remaining - e, cur, out);
  }
  cur[static_cast<std::size_t>(vars[pos])] = 0;
}

}  // namespace

MonomialBasis::MonomialBasis(SpacePtr space, std::vector<int> vars, int d)
    : space_(std::move(space)), vars_(std::move(vars)), degree_(d) {
  if (d < 0) throw std::invalid_argument("monomial basis degree must be nonnegative");
  std::sort(vars_.begin(), vars_.end());
  MultiIndex cur(space_->size());
  if (vars_.empty()) {
    monos_.push_back(cur);
  } else {
    for (int deg = 0; deg <= d; ++deg) enumerate_degree(vars_, 0, deg, cur, monos_);
  }
  index_.reserve(monos_.size());
  for (std::size_t i = 0; i < monos_.size(); ++i) index_.emplace(monos_[i], static_cast<int>(i));
}

int MonomialBasis::find(const MultiIndex& m) const {
  auto it = index_.find(m);
  return it == index_.end() ? -1 : it->second;
}

Eigen::VectorXd MonomialBasis::evaluate(std::span<const double> point) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(monos_.size()));
  for (std::size_t i = 0; i < monos_.size(); ++i) {
    double v = 1.0;
    for (int var : vars_)
      for (int e = 0; e < monos_[i][static_cast<std::size_t>(var)]; ++e) v *= point[static_cast<std::size_t>(var)];
    out[static_cast<Eigen::Index>(i)] = v;
  }
  return out;
}

MonomialBasis monomial_basis(SpacePtr space, std::vector<int> vars, int d) {
  return MonomialBasis(std::move(space), std::move(vars), d);
}

Polynomial gram_expand(const Eigen::MatrixXd& Q, const MonomialBasis& basis) {
  const auto n = static_cast<Eigen::Index>(basis.size());
  if (Q.rows() != n || Q.cols() != n)
    throw std::invalid_argument("gram_expand: matrix dimension does not match basis size");
  Polynomial r(basis.space());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      r.add_term(basis[static_cast<std::size_t>(i)] + basis[static_cast<std::size_t>(j)], Q(i, j));
  return r;
}

std::size_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
  return r;
}

}  // namespace stochsafe
