#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stochsafe/model.hpp"
#include "stochsafe/sdp.hpp"
#include "stochsafe/sos.hpp"

namespace stochsafe {

class CertificateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One order of one program: the scaled data it was assembled from and the raw solve.
struct SolvedOrder {
  SafetyProblem scaled;
  ScalingRecord record;
  AssembledProgram program;
  sdp::SdpSolution solution;
  double wall_time_s = 0.0;
};

/// Scales `problem`, assembles the requested tightening at order k and solves it.
SolvedOrder solve_order(const SafetyProblem& problem, int k, Variant variant, const sdp::SolverOptions& opts = {},
                        std::optional<std::vector<double>> mu0 = std::nullopt);

struct ConstraintCheck {
  std::string name;
  int samples = 0;
  /// Largest amount by which a sample violates the constraint (<= 0 when none).
  double worst = 0.0;
};

struct WsosResidual {
  std::string label;
  /// max |target - reconstruction| over the probe points, divided by `scale`.
  double residual = 0.0;
  double scale = 1.0;
};

struct VerificationReport {
  double tolerance = 1e-5;
  std::vector<ConstraintCheck> checks;
  std::vector<WsosResidual> wsos;
  double min_gram_eigenvalue = 0.0;

  bool samples_pass() const;
  bool wsos_pass() const;
  bool passed() const { return samples_pass() && wsos_pass(); }
};

struct Certificate {
  int order = 1;
  Variant variant = Variant::UnsafeBound;
  sdp::SolveStatus status = sdp::SolveStatus::Optimal;
  /// v(t, x) in original coordinates.
  Polynomial v;
  /// v in the scaled coordinates the program was solved in.
  Polynomial v_scaled;
  /// gamma for UnsafeBound, <v(t0, .), mu0> for RiskContour.
  double bound = 0.0;
  std::vector<Eigen::MatrixXd> grams;
  Eigen::VectorXd x_free;
  VerificationReport report;
};

/// Reads v and the bound out of a solve. Throws CertificateError unless the
/// status is Optimal; `allow_inexact` accepts any status that carries an iterate.
Certificate extract_certificate(const SolvedOrder& solved, bool allow_inexact = false);

struct VerifyOptions {
  int samples = 4096;
  int wsos_points = 100;
  double tolerance = 1e-5;
  unsigned seed = 0;
};

/// Checks the certificate against the original problem on low-discrepancy
/// samples: v >= 0 on [t0, T] x X, v >= 1 on [t0, T] x Xu, Lv <= 0 on
/// [t0, T] x X (with L scaled to unit horizon), gamma >= v(t0, .) on X0 for
/// UnsafeBound; plus the WSOS identity of every constraint at probe points.
VerificationReport verify_certificate(const Certificate& cert, const SafetyProblem& problem, const SolvedOrder& solved,
                                      const VerifyOptions& opts = {});

struct MomentDiagnostics {
  /// Test monomials t^a x^b with a + |b| <= 2k, in scaled coordinates.
  std::vector<MultiIndex> monomials;
  /// <m, mu_c + mu_p> - <m(0, .), mu0> - <Lm, mu> per test monomial.
  std::vector<double> liouville_residual;
  double mass_initial = 0.0;
  double mass_terminal = 0.0;
  /// <1, mu> in scaled time, and the same mass in original time units.
  double mass_occupation = 0.0;
  double mass_occupation_original = 0.0;

  double max_residual() const;
};

/// Pseudo-moments of (mu0, mu, mu_c, mu_p) read from the dual vector.
MomentDiagnostics moment_diagnostics(const SolvedOrder& solved);

struct RiskGrid {
  std::vector<std::string> state_names;
  std::vector<int> resolution;
  /// Row-major over the first state fastest.
  std::vector<std::vector<double>> points;
  std::vector<double> values;
  std::vector<int> orders;
};

/// q(x) = clamp(min_k v_k(t, x), 0, 1) over a rectangular grid of X's
/// bounding box, with the order attaining the minimum. Throws
/// std::invalid_argument on an empty list or a non-RiskContour certificate.
RiskGrid risk_grid(const std::vector<Certificate>& certs, const SafetyProblem& problem, int resolution,
                   std::optional<double> t = std::nullopt);

/// Header `x1,x2,...,q,order` with the problem's state names.
void write_grid_csv(const RiskGrid& grid, std::ostream& out);

nlohmann::json to_json(const VerificationReport& r);
nlohmann::json to_json(const Certificate& c);
nlohmann::json to_json(const MomentDiagnostics& d);

/// {order, bound, solver_status, wall_time_s, residuals}.
nlohmann::json bound_record(const Certificate& c, const SolvedOrder& solved);

}  // namespace stochsafe
