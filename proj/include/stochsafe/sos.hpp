#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stochsafe/model.hpp"
#include "stochsafe/polynomial.hpp"
#include "stochsafe/sdp.hpp"

namespace stochsafe {

/// c = constant + sum_f coef_f * x_f, with x_f free SDP variables.
struct LinearPoly {
  Polynomial constant;
  std::vector<std::pair<int, Polynomial>> terms;

  Polynomial evaluate(const Eigen::VectorXd& x_free) const;
};

struct GramSlot {
  int block = -1;
  MonomialBasis basis;
  /// -1 for sigma_0, else the index of the multiplied inequality.
  int multiplier = -1;
};

/// One Putinar identity c = sigma_0 + sum_i sigma_i g_i + sum_j phi_j h_j, with
/// one SDP row per monomial of degree <= 2d in `vars`.
struct WsosTemplate {
  std::string label;
  std::vector<int> vars;
  int degree = 0;  // 2d
  std::vector<Polynomial> inequalities;
  std::vector<Polynomial> equalities;
  LinearPoly target;
  MonomialBasis rows;
  int first_row = 0;
  std::vector<GramSlot> grams;  // sigma_0 first
  /// phi_j coefficients are free variables phi_offset[j] + (index in phi_basis[j]).
  std::vector<int> phi_offset;
  std::vector<MonomialBasis> phi_basis;

  int row_of(const MultiIndex& m) const;
  /// sigma_0 + sum sigma_i g_i + sum phi_j h_j for an assignment.
  Polynomial reconstruct(const std::vector<Eigen::MatrixXd>& X, const Eigen::VectorXd& x_free) const;
};

/// Emits the rows, Gram blocks and phi variables for c in the quadratic module
/// of {g >= 0, h = 0} truncated at degree 2d. Throws std::invalid_argument when
/// c exceeds the degree or uses variables outside `vars`.
WsosTemplate wsos_constrain(sdp::BlockSdp& sdp, std::string label, const LinearPoly& c, std::vector<int> vars,
                            std::vector<Polynomial> inequalities, std::vector<Polynomial> equalities,
                            int degree);

enum class Variant { UnsafeBound, RiskContour };

const char* to_string(Variant v);

/// Layout of an assembled tightening over a scaled problem.
struct AssembledProgram {
  sdp::BlockSdp sdp;
  Variant variant = Variant::UnsafeBound;
  int order = 1;
  int dynamics_degree = 1;
  SpacePtr space;
  std::vector<int> tx_vars;  // (t, states)
  /// Monomials of v, degree <= 2k in (t, x); v coefficient i is free variable v_offset + i.
  MonomialBasis v_basis;
  int v_offset = 0;
  int gamma = -1;
  /// L applied to each v_basis monomial.
  std::vector<Polynomial> lie_basis;
  /// Initial-measure moments for RiskContour, over `mu0_basis` (states, degree <= 2k).
  MonomialBasis mu0_basis;
  std::vector<double> mu0;
  /// "initial" (UnsafeBound only), "lie", "nonneg", "unsafe".
  std::vector<WsosTemplate> constraints;

  const WsosTemplate& constraint(const std::string& label) const;
  const WsosTemplate* find_constraint(const std::string& label) const;
  /// v(t, x) in scaled coordinates.
  Polynomial v(const Eigen::VectorXd& x_free) const;
};

/// Moments of the uniform probability measure on [-1, 1]^n over `basis`.
std::vector<double> uniform_box_moments(const MonomialBasis& basis);

/// Gram side of the Lie constraint: binomial(n + 1 + k~, k~).
std::size_t lie_gram_size(std::size_t num_states, int ktilde);

/// Minimize gamma over the four WSOS constraints. `scaled` must come from scale_problem.
AssembledProgram build_unsafe_sdp(const SafetyProblem& scaled, int k);

/// Minimize <v(t0, .), mu0>; mu0 defaults to the uniform measure on [-1, 1]^n.
AssembledProgram build_risk_sdp(const SafetyProblem& scaled, int k,
                                std::optional<std::vector<double>> mu0 = std::nullopt);

}  // namespace stochsafe
