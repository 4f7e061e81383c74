#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace stochsafe::sdp {

/// One stored entry of a symmetric matrix; only i <= j is kept.
struct SymEntry {
  int i;
  int j;
  double value;
};

using SparseSym = std::vector<SymEntry>;

/// Weight with which an atom matrix enters an equality row.
struct Coupling {
  int row;
  int atom;
  double coef;
};

/// A PSD block. The constraint matrix of row r restricted to this block is
/// sum over couplings (r, k, w) of w * atoms[k]. Assemblers that produce the
/// same selector matrix in many rows (Gram/Hankel structure) register it once.
struct PsdBlock {
  int dim = 0;
  std::vector<SparseSym> atoms;
  std::vector<Coupling> couplings;
  SparseSym objective;
};

struct FreeEntry {
  int row;
  int var;
  double coef;
};

/// Standard-form block SDP with free variables:
///
///   minimize    sum_b <C_b, X_b> + c_free' x
///   subject to  sum_b <A_rb, X_b> + (B x)_r = b_r   for every row r
///               X_b PSD,  x free.
class BlockSdp {
 public:
  int add_row(double rhs);
  int add_block(int dim);
  int add_atom(int block, SparseSym atom);
  void couple(int row, int block, int atom, double coef);
  int add_free(double cost = 0.0);
  void add_free_entry(int row, int var, double coef);
  void add_objective_entry(int block, int i, int j, double v);

  int num_rows() const { return static_cast<int>(b.size()); }
  int num_free() const { return static_cast<int>(c_free.size()); }

  /// Row r's matrix in block `blk`, entries merged and sorted by (i, j).
  SparseSym row_matrix(int row, int blk) const;
  /// Throws std::invalid_argument on out-of-range indices or i > j entries.
  void validate() const;

  std::vector<PsdBlock> blocks;
  std::vector<FreeEntry> free_entries;
  Eigen::VectorXd b;
  Eigen::VectorXd c_free;
};

enum class SolveStatus { Optimal, PrimalInfeasible, DualInfeasible, MaxIterations, NumericalTrouble };

const char* to_string(SolveStatus s);

struct SolverOptions {
  double gap_tol = 1e-8;
  double feas_tol = 1e-8;
  /// Accepted as Optimal when the iteration stalls before reaching the targets.
  double fallback_tol = 1e-7;
  int max_iterations = 200;
  double infeasibility_tol = 1e-8;
  /// Threshold used to drop dependent rows / free columns.
  double rank_tol = 1e-10;
  bool verbose = false;
};

struct SdpSolution {
  SolveStatus status = SolveStatus::NumericalTrouble;
  std::vector<Eigen::MatrixXd> X;
  Eigen::VectorXd x_free;
  Eigen::VectorXd y;
  std::vector<Eigen::MatrixXd> S;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_infeasibility = 0.0;  // ||b - A(X) - Bx||_inf / (1 + ||b||_inf)
  double dual_infeasibility = 0.0;
  double relative_gap = 0.0;          // |p - d| / (1 + |p| + |d|)
  int iterations = 0;
  int dropped_rows = 0;
  int dropped_free = 0;
};

SdpSolution solve(const BlockSdp& sdp, const SolverOptions& opts = {});

/// Raw row residual b - A(X) - Bx for an arbitrary assignment.
Eigen::VectorXd primal_residual(const BlockSdp& sdp, const std::vector<Eigen::MatrixXd>& X,
                                const Eigen::VectorXd& x_free);

// ---------------------------------------------------------------- SDPA interchange

/// Records what the SDPA file alone cannot: how the split free-variable
/// diagonal block maps back and how the objective sign was flipped.
struct SdpaManifest {
  std::vector<int> psd_dims;
  int num_free = 0;
  int num_rows = 0;
  /// Index (0-based, in SDPA block order) of the diagonal split block, -1 if none.
  int split_block = -1;
  std::vector<std::string> free_names;
  std::string to_json() const;
  static SdpaManifest from_json(const std::string& text);
};

/// Writes SDPA sparse format. Rows become SDPA constraint matrices F_1..F_m,
/// c_r = b_r, F_0 = -C, so SDPA's dual max F_0.Y equals minus our objective.
/// Free variables are emitted as a diagonal block of size 2F holding x+ and x-.
SdpaManifest export_sdpa(const BlockSdp& sdp, std::ostream& out,
                         const std::vector<std::string>& free_names = {});

class SdpaParseError : public std::runtime_error {
 public:
  SdpaParseError(const std::string& what, int line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Inverse of export_sdpa. Without a manifest, diagonal blocks become 1x1 PSD blocks.
BlockSdp import_sdpa(std::istream& in, const SdpaManifest* manifest = nullptr);

}  // namespace stochsafe::sdp
