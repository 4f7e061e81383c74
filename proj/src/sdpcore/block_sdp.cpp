#include <algorithm>
#include <map>
#include <stdexcept>

#include "stochsafe/sdp.hpp"

namespace stochsafe::sdp {

int BlockSdp::add_row(double rhs) {
  const auto n = b.size();
  b.conservativeResize(n + 1);
  b[n] = rhs;
  return static_cast<int>(n);
}

int BlockSdp::add_block(int dim) {
  if (dim <= 0) throw std::invalid_argument("PSD block dimension must be positive");
  PsdBlock blk;
  blk.dim = dim;
  blocks.push_back(std::move(blk));
  return static_cast<int>(blocks.size()) - 1;
}

int BlockSdp::add_atom(int block, SparseSym atom) {
  auto& blk = blocks.at(static_cast<std::size_t>(block));
  for (auto& e : atom)
    if (e.i > e.j) std::swap(e.i, e.j);
  blk.atoms.push_back(std::move(atom));
  return static_cast<int>(blk.atoms.size()) - 1;
}

void BlockSdp::couple(int row, int block, int atom, double coef) {
  if (coef == 0.0) return;
  blocks.at(static_cast<std::size_t>(block)).couplings.push_back({row, atom, coef});
}

int BlockSdp::add_free(double cost) {
  const auto n = c_free.size();
  c_free.conservativeResize(n + 1);
  c_free[n] = cost;
  return static_cast<int>(n);
}

void BlockSdp::add_free_entry(int row, int var, double coef) {
  if (coef == 0.0) return;
  free_entries.push_back({row, var, coef});
}

void BlockSdp::add_objective_entry(int block, int i, int j, double v) {
  if (i > j) std::swap(i, j);
  blocks.at(static_cast<std::size_t>(block)).objective.push_back({i, j, v});
}

SparseSym BlockSdp::row_matrix(int row, int blk) const {
  const auto& block = blocks.at(static_cast<std::size_t>(blk));
  std::map<std::pair<int, int>, double> acc;
  for (const auto& c : block.couplings) {
    if (c.row != row) continue;
    for (const auto& e : block.atoms[static_cast<std::size_t>(c.atom)]) acc[{e.i, e.j}] += c.coef * e.value;
  }
  SparseSym out;
  for (const auto& [ij, v] : acc)
    if (v != 0.0) out.push_back({ij.first, ij.second, v});
  return out;
}

void BlockSdp::validate() const {
  const int m = num_rows();
  const int f = num_free();
  for (const auto& blk : blocks) {
    if (blk.dim <= 0) throw std::invalid_argument("block with nonpositive dimension");
    auto check = [&](const SparseSym& s) {
      for (const auto& e : s) {
        if (e.i < 0 || e.j < 0 || e.i >= blk.dim || e.j >= blk.dim)
          throw std::invalid_argument("matrix entry outside its block");
        if (e.i > e.j) throw std::invalid_argument("symmetric entries must be stored with i <= j");
      }
    };
    for (const auto& a : blk.atoms) check(a);
    check(blk.objective);
    for (const auto& c : blk.couplings) {
      if (c.row < 0 || c.row >= m) throw std::invalid_argument("coupling row out of range");
      if (c.atom < 0 || c.atom >= static_cast<int>(blk.atoms.size()))
        throw std::invalid_argument("coupling atom out of range");
    }
  }
  for (const auto& e : free_entries) {
    if (e.row < 0 || e.row >= m) throw std::invalid_argument("free entry row out of range");
    if (e.var < 0 || e.var >= f) throw std::invalid_argument("free entry variable out of range");
  }
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::PrimalInfeasible: return "PrimalInfeasible";
    case SolveStatus::DualInfeasible: return "DualInfeasible";
    case SolveStatus::MaxIterations: return "MaxIterations";
    case SolveStatus::NumericalTrouble: return "NumericalTrouble";
  }
  return "Unknown";
}

Eigen::VectorXd primal_residual(const BlockSdp& sdp, const std::vector<Eigen::MatrixXd>& X,
                                const Eigen::VectorXd& x_free) {
  Eigen::VectorXd r = sdp.b;
  for (std::size_t bi = 0; bi < sdp.blocks.size(); ++bi) {
    const auto& blk = sdp.blocks[bi];
    std::vector<double> trace(blk.atoms.size(), 0.0);
    for (std::size_t k = 0; k < blk.atoms.size(); ++k) {
      double s = 0.0;
      for (const auto& e : blk.atoms[k]) s += e.value * (e.i == e.j ? X[bi](e.i, e.j) : 2.0 * X[bi](e.i, e.j));
      trace[k] = s;
    }
    for (const auto& c : blk.couplings) r[c.row] -= c.coef * trace[static_cast<std::size_t>(c.atom)];
  }
  for (const auto& e : sdp.free_entries) r[e.row] -= e.coef * x_free[e.var];
  return r;
}

}  // namespace stochsafe::sdp
