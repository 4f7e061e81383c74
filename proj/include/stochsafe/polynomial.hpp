#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace stochsafe {

enum class VarRole { Time, State, Parameter };

/// Ordered, named variables shared by every polynomial of one problem.
///
/// At most one variable may carry the time role and the state variables
/// occupy one contiguous index range.
class VariableSpace {
 public:
  struct Variable {
    std::string name;
    VarRole role;
  };

  VariableSpace() = default;
  explicit VariableSpace(std::vector<Variable> vars);

  /// Convenience: all variables are states.
  static std::shared_ptr<const VariableSpace> states(const std::vector<std::string>& names);

  std::size_t size() const { return vars_.size(); }
  const Variable& operator[](std::size_t i) const { return vars_[i]; }
  const std::vector<Variable>& variables() const { return vars_; }

  /// Index of `name`, or -1.
  int find(std::string_view name) const;
  /// Index of `name`; throws std::invalid_argument when unknown.
  int index(std::string_view name) const;

  int time_index() const { return time_index_; }
  std::vector<int> state_indices() const;
  std::vector<int> parameter_indices() const;
  std::size_t num_states() const;

  bool operator==(const VariableSpace& other) const;

 private:
  std::vector<Variable> vars_;
  int time_index_ = -1;
};

using SpacePtr = std::shared_ptr<const VariableSpace>;

/// Exponent vector, one entry per variable of the owning space.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::size_t n) : exps_(n, 0) {}
  explicit MultiIndex(std::vector<int> exps) : exps_(std::move(exps)) {}

  std::size_t size() const { return exps_.size(); }
  int operator[](std::size_t i) const { return exps_[i]; }
  int& operator[](std::size_t i) { return exps_[i]; }
  const std::vector<int>& exponents() const { return exps_; }

  int degree() const;
  /// Sum of exponents restricted to `vars`.
  int degree_in(std::span<const int> vars) const;

  MultiIndex operator+(const MultiIndex& o) const;
  /// Componentwise difference; valid only when `divides(o, *this)`.
  MultiIndex operator-(const MultiIndex& o) const;
  bool divides(const MultiIndex& o) const;  // this <= o componentwise

  bool operator==(const MultiIndex& o) const { return exps_ == o.exps_; }
  bool operator!=(const MultiIndex& o) const { return exps_ != o.exps_; }

 private:
  std::vector<int> exps_;
};

/// Graded lexicographic order: lower total degree first; within a degree,
/// larger leading exponents first (x1^2 < x1*x2 < x2^2).
struct GrlexLess {
  bool operator()(const MultiIndex& a, const MultiIndex& b) const;
};

struct MultiIndexHash {
  std::size_t operator()(const MultiIndex& m) const noexcept;
};

class Polynomial {
 public:
  using TermMap = std::map<MultiIndex, double, GrlexLess>;

  Polynomial() = default;
  explicit Polynomial(SpacePtr space) : space_(std::move(space)) {}
  static Polynomial constant(SpacePtr space, double c);
  static Polynomial variable(SpacePtr space, int var_index);
  static Polynomial monomial(SpacePtr space, const MultiIndex& m, double coef = 1.0);

  const SpacePtr& space() const { return space_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t num_terms() const { return terms_.size(); }

  /// Total degree; the zero polynomial has degree 0.
  int degree() const;
  int degree_in(std::span<const int> vars) const;
  /// Highest power of one variable.
  int degree_of(int var) const;
  double coefficient(const MultiIndex& m) const;
  double max_abs_coefficient() const;
  /// True if no variable outside `vars` appears.
  bool uses_only(std::span<const int> vars) const;

  /// Adds `c` to the coefficient of `m`, dropping it when it becomes exactly 0.
  void add_term(const MultiIndex& m, double c);

  double evaluate(std::span<const double> point) const;

  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial operator*(double s) const;
  Polynomial operator-() const { return (*this) * -1.0; }
  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial pow(int e) const;

  bool operator==(const Polynomial& o) const;
  bool operator!=(const Polynomial& o) const { return !(*this == o); }

  /// Canonical rendering in graded-lex order; parses back to the same terms.
  std::string to_string() const;

 private:
  void check_space(const Polynomial& o) const;

  SpacePtr space_;
  TermMap terms_;
};

inline Polynomial operator*(double s, const Polynomial& p) { return p * s; }

Polynomial add(const Polynomial& p, const Polynomial& q);
Polynomial sub(const Polynomial& p, const Polynomial& q);
Polynomial mul(const Polynomial& p, const Polynomial& q);
Polynomial scale(const Polynomial& p, double s);

Polynomial differentiate(const Polynomial& p, int var);
Polynomial differentiate(const Polynomial& p, std::string_view var);

/// Simultaneous substitution of variables by polynomials over the same space.
/// Powers of every image are cached, so reuse one instance for many inputs.
class Substitution {
 public:
  explicit Substitution(SpacePtr space);
  Substitution& set(int var, Polynomial image);
  Substitution& set(std::string_view var, Polynomial image);
  Polynomial apply(const Polynomial& p) const;

 private:
  const Polynomial& power(int var, int e) const;

  SpacePtr space_;
  std::vector<std::unique_ptr<Polynomial>> images_;
  mutable std::vector<std::vector<Polynomial>> powers_;
};

Polynomial compose(const Polynomial& p, const std::map<std::string, Polynomial>& subst);

/// Replaces each power var^j by moments[j] (expectation over an independent
/// parameter with the given raw moments). Throws if a needed order is missing.
Polynomial expect_parameter(const Polynomial& p, int var, std::span<const double> moments);
Polynomial expect_parameter(const Polynomial& p, std::string_view var,
                            std::span<const double> moments);

class MonomialBasis {
 public:
  MonomialBasis() = default;
  /// Every monomial in `vars` (indices into `space`) with degree <= d, grlex.
  MonomialBasis(SpacePtr space, std::vector<int> vars, int d);

  const SpacePtr& space() const { return space_; }
  const std::vector<int>& vars() const { return vars_; }
  int degree() const { return degree_; }
  std::size_t size() const { return monos_.size(); }
  const MultiIndex& operator[](std::size_t i) const { return monos_[i]; }
  const std::vector<MultiIndex>& monomials() const { return monos_; }

  /// Position of `m` or -1.
  int find(const MultiIndex& m) const;
  /// Values of every basis monomial at `point` (full-space coordinates).
  Eigen::VectorXd evaluate(std::span<const double> point) const;

 private:
  SpacePtr space_;
  std::vector<int> vars_;
  int degree_ = 0;
  std::vector<MultiIndex> monos_;
  std::unordered_map<MultiIndex, int, MultiIndexHash> index_;
};

MonomialBasis monomial_basis(SpacePtr space, std::vector<int> vars, int d);

/// Sum_{i,j} Q(i,j) b_i b_j.
Polynomial gram_expand(const Eigen::MatrixXd& Q, const MonomialBasis& basis);

/// binomial(n, k) as a size_t; n, k small.
std::size_t binomial(int n, int k);

}  // namespace stochsafe
