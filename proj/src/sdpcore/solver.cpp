// Infeasible primal-dual path-following method for BlockSdp using the
// HKM search direction with a Mehrotra predictor-corrector. The Schur
// complement M is block diagonal over groups of rows that share PSD blocks.
// Free variables are handled with a null-space method on the saddle system
// [M B; B' 0]: with B = Q1 R, the reduced matrix Q2' M Q2 stays definite when
// M degenerates along the range of B, which is typical near optimality.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/Sparse>

#include "stochsafe/sdp.hpp"

namespace stochsafe::sdp {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Atom with both triangles expanded: <E, K> = sum v * K(p, q).
struct Atom {
  std::vector<int> p;
  std::vector<int> q;
  std::vector<double> v;
  double frob2 = 0.0;
};

struct BlockWork {
  int dim = 0;
  int group = -1;
  std::vector<Atom> atoms;
  SpMat W;  // group-local rows x atoms
  MatrixXd C;
  MatrixXd X, S, Z;
};

struct Group {
  std::vector<int> rows;  // kept-row indices
  std::vector<int> blocks;
  MatrixXd M;
  Eigen::LLT<MatrixXd> llt;
};

Atom expand(const SparseSym& s) {
  Atom a;
  for (const auto& e : s) {
    a.p.push_back(e.i);
    a.q.push_back(e.j);
    a.v.push_back(e.value);
    a.frob2 += e.value * e.value;
    if (e.i != e.j) {
      a.p.push_back(e.j);
      a.q.push_back(e.i);
      a.v.push_back(e.value);
      a.frob2 += e.value * e.value;
    }
  }
  return a;
}

MatrixXd dense_sym(const SparseSym& s, int n) {
  MatrixXd m = MatrixXd::Zero(n, n);
  for (const auto& e : s) {
    m(e.i, e.j) += e.value;
    if (e.i != e.j) m(e.j, e.i) += e.value;
  }
  return m;
}

double atom_trace(const Atom& a, const MatrixXd& K) {
  double s = 0.0;
  for (std::size_t t = 0; t < a.p.size(); ++t) s += a.v[t] * K(a.p[t], a.q[t]);
  return s;
}

void sym_inplace(MatrixXd& m) { m = 0.5 * (m + m.transpose()).eval(); }

/// Largest alpha with X + alpha dX PSD (infinite if dX is PSD in the X metric).
double max_step(const MatrixXd& X, const MatrixXd& dX) {
  Eigen::LLT<MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  MatrixXd t = llt.matrixL().solve(dX);
  MatrixXd w = llt.matrixL().solve(t.transpose());
  sym_inplace(w);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(w, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  return lmin >= 0.0 ? kInf : -1.0 / lmin;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

/// Row dependency analysis. Returns the indices of rows to keep; sets
/// `inconsistent` if a dropped row's right-hand side disagrees with the others.
std::vector<int> independent_rows(const BlockSdp& sdp, double tol, bool& inconsistent) {
  inconsistent = false;
  const int m = sdp.num_rows();
  // Column key: (block, i, j) for PSD entries, free vars after all blocks.
  std::vector<std::vector<std::pair<long long, double>>> rows(static_cast<std::size_t>(m));
  long long offset = 0;
  for (std::size_t bi = 0; bi < sdp.blocks.size(); ++bi) {
    const auto& blk = sdp.blocks[bi];
    std::vector<std::vector<std::pair<int, double>>> per_row(static_cast<std::size_t>(m));
    for (const auto& c : blk.couplings) per_row[static_cast<std::size_t>(c.row)].push_back({c.atom, c.coef});
    for (int r = 0; r < m; ++r) {
      if (per_row[static_cast<std::size_t>(r)].empty()) continue;
      std::unordered_map<long long, double> acc;
      for (const auto& [atom, coef] : per_row[static_cast<std::size_t>(r)])
        for (const auto& e : blk.atoms[static_cast<std::size_t>(atom)])
          acc[offset + static_cast<long long>(e.i) * blk.dim + e.j] += coef * e.value * (e.i == e.j ? 1.0 : std::sqrt(2.0));
      for (const auto& [key, v] : acc)
        if (v != 0.0) rows[static_cast<std::size_t>(r)].push_back({key, v});
    }
    offset += static_cast<long long>(blk.dim) * blk.dim;
  }
  for (const auto& e : sdp.free_entries) rows[static_cast<std::size_t>(e.row)].push_back({offset + e.var, e.coef});

  std::vector<int> all(static_cast<std::size_t>(m));
  std::iota(all.begin(), all.end(), 0);

  // Fast path: a row owning a column no other row touches is independent of
  // the rest; if every row owns one the whole system has full row rank.
  std::unordered_map<long long, int> count;
  for (const auto& r : rows)
    for (const auto& [key, v] : r) ++count[key];
  bool all_private = true;
  for (const auto& r : rows) {
    bool owns = false;
    for (const auto& [key, v] : r)
      if (count[key] == 1) {
        owns = true;
        break;
      }
    if (!owns) {
      all_private = false;
      break;
    }
  }
  if (all_private) return all;

  std::unordered_map<long long, int> colmap;
  for (const auto& r : rows)
    for (const auto& [key, v] : r) colmap.try_emplace(key, static_cast<int>(colmap.size()));
  MatrixXd At = MatrixXd::Zero(static_cast<Index>(colmap.size()), m);
  for (int r = 0; r < m; ++r) {
    double nrm = 0.0;
    for (const auto& [key, v] : rows[static_cast<std::size_t>(r)]) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) continue;
    for (const auto& [key, v] : rows[static_cast<std::size_t>(r)]) At(colmap[key], r) = v / nrm;
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(At);
  qr.setThreshold(tol);
  const Index rank = qr.rank();
  if (rank == m) return all;
  std::vector<int> keep;
  for (Index i = 0; i < rank; ++i) keep.push_back(static_cast<int>(qr.colsPermutation().indices()[i]));
  std::sort(keep.begin(), keep.end());
  // Consistency: dropped rows must be reproduced with matching rhs.
  std::vector<char> kept(static_cast<std::size_t>(m), 0);
  for (int k : keep) kept[static_cast<std::size_t>(k)] = 1;
  MatrixXd Ak(At.rows(), static_cast<Index>(keep.size()));
  VectorXd bk(static_cast<Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    double nrm = At.col(keep[i]).norm();
    Ak.col(static_cast<Index>(i)) = At.col(keep[i]);
    double raw = 0.0;
    for (const auto& [key, v] : rows[static_cast<std::size_t>(keep[i])]) raw += v * v;
    bk[static_cast<Index>(i)] = raw > 0 ? sdp.b[keep[i]] / std::sqrt(raw) : 0.0;
    (void)nrm;
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qk(Ak);
  for (int r = 0; r < m; ++r) {
    if (kept[static_cast<std::size_t>(r)]) continue;
    double raw = 0.0;
    for (const auto& [key, v] : rows[static_cast<std::size_t>(r)]) raw += v * v;
    const double br = raw > 0 ? sdp.b[r] / std::sqrt(raw) : sdp.b[r];
    VectorXd z = qk.solve(At.col(r));
    if (std::abs(br - z.dot(bk)) > 1e-8 * (1.0 + std::abs(br))) inconsistent = true;
  }
  return keep;
}

class Solver {
 public:
  Solver(const BlockSdp& sdp, const SolverOptions& opts) : sdp_(sdp), opts_(opts) {}

  SdpSolution run();

 private:
  void setup();
  VectorXd apply_A(const std::vector<MatrixXd>& K) const;
  MatrixXd apply_At(int bi, const VectorXd& y) const;
  bool build_and_factor();
  void form_schur();
  bool factor();
  void solve_kkt(const VectorXd& h, const VectorXd& rf, VectorXd& dy, VectorXd& dx) const;
  void solve_once(const VectorXd& h, const VectorXd& rf, VectorXd& dy, VectorXd& dx) const;
  VectorXd apply_M(const VectorXd& v) const;
  void direction(const std::vector<MatrixXd>& Rd, const VectorXd& rp, const VectorXd& rf,
                 const std::vector<MatrixXd>& G, VectorXd& dy, VectorXd& dx,
                 std::vector<MatrixXd>& dX, std::vector<MatrixXd>& dS) const;
  SdpSolution package(SolveStatus status, const VectorXd& y, const VectorXd& xf, int it) const;
  void polish(VectorXd& xf);

  const BlockSdp& sdp_;
  SolverOptions opts_;

  std::vector<int> kept_rows_;
  std::vector<int> kept_free_;
  std::vector<int> row_group_;
  std::vector<int> row_local_;
  VectorXd b_;
  VectorXd row_scale_;
  VectorXd cf_;
  SpMat B_;
  std::vector<BlockWork> blocks_;
  std::vector<Group> groups_;
  int nsum_ = 0;

  // Null-space data, B = Q [R; 0].
  MatrixXd Q_;
  MatrixXd R_;
  Eigen::LLT<MatrixXd> pfac_;
  bool use_lu_ = false;
  Eigen::PartialPivLU<MatrixXd> lu_;

  bool infeasible_rows_ = false;
  int dropped_rows_ = 0;
  int dropped_free_ = 0;
};

void Solver::setup() {
  sdp_.validate();
  const int m0 = sdp_.num_rows();
  kept_rows_ = independent_rows(sdp_, opts_.rank_tol, infeasible_rows_);
  dropped_rows_ = m0 - static_cast<int>(kept_rows_.size());
  std::vector<int> row_new(static_cast<std::size_t>(m0), -1);
  for (std::size_t i = 0; i < kept_rows_.size(); ++i) row_new[static_cast<std::size_t>(kept_rows_[i])] = static_cast<int>(i);
  const int m = static_cast<int>(kept_rows_.size());
  b_.resize(m);
  for (int i = 0; i < m; ++i) b_[i] = sdp_.b[kept_rows_[static_cast<std::size_t>(i)]];

  // Dependent free columns are pinned to zero.
  const int f0 = sdp_.num_free();
  if (f0 > 0) {
    MatrixXd Bd = MatrixXd::Zero(m, f0);
    for (const auto& e : sdp_.free_entries) {
      const int r = row_new[static_cast<std::size_t>(e.row)];
      if (r >= 0) Bd(r, e.var) += e.coef;
    }
    VectorXd cn = Bd.colwise().norm();
    for (Index j = 0; j < f0; ++j)
      if (cn[j] > 0) Bd.col(j) /= cn[j];
    Eigen::ColPivHouseholderQR<MatrixXd> qr(Bd);
    qr.setThreshold(opts_.rank_tol);
    const Index rank = qr.rank();
    for (Index i = 0; i < rank; ++i) kept_free_.push_back(static_cast<int>(qr.colsPermutation().indices()[i]));
    std::sort(kept_free_.begin(), kept_free_.end());
  }
  dropped_free_ = f0 - static_cast<int>(kept_free_.size());
  std::vector<int> free_new(static_cast<std::size_t>(f0), -1);
  for (std::size_t i = 0; i < kept_free_.size(); ++i) free_new[static_cast<std::size_t>(kept_free_[i])] = static_cast<int>(i);
  const int f = static_cast<int>(kept_free_.size());
  cf_.resize(f);
  for (int j = 0; j < f; ++j) cf_[j] = sdp_.c_free[kept_free_[static_cast<std::size_t>(j)]];
  std::vector<Triplet> bt;
  for (const auto& e : sdp_.free_entries) {
    const int r = row_new[static_cast<std::size_t>(e.row)];
    const int c = free_new[static_cast<std::size_t>(e.var)];
    if (r >= 0 && c >= 0) bt.emplace_back(r, c, e.coef);
  }
  B_.resize(m, f);
  B_.setFromTriplets(bt.begin(), bt.end());

  // Row groups: rows sharing a PSD block are coupled in M.
  UnionFind uf(m);
  for (const auto& blk : sdp_.blocks) {
    int first = -1;
    for (const auto& c : blk.couplings) {
      const int r = row_new[static_cast<std::size_t>(c.row)];
      if (r < 0) continue;
      if (first < 0) first = r;
      else uf.unite(first, r);
    }
  }
  row_group_.assign(static_cast<std::size_t>(m), -1);
  row_local_.assign(static_cast<std::size_t>(m), -1);
  std::unordered_map<int, int> root_to_group;
  for (int r = 0; r < m; ++r) {
    const int root = uf.find(r);
    auto [it, inserted] = root_to_group.try_emplace(root, static_cast<int>(groups_.size()));
    if (inserted) groups_.emplace_back();
    auto& g = groups_[static_cast<std::size_t>(it->second)];
    row_group_[static_cast<std::size_t>(r)] = it->second;
    row_local_[static_cast<std::size_t>(r)] = static_cast<int>(g.rows.size());
    g.rows.push_back(r);
  }

  nsum_ = 0;
  for (std::size_t bi = 0; bi < sdp_.blocks.size(); ++bi) {
    const auto& blk = sdp_.blocks[bi];
    BlockWork w;
    w.dim = blk.dim;
    nsum_ += blk.dim;
    for (const auto& a : blk.atoms) w.atoms.push_back(expand(a));
    w.C = dense_sym(blk.objective, blk.dim);
    std::vector<Triplet> wt;
    for (const auto& c : blk.couplings) {
      const int r = row_new[static_cast<std::size_t>(c.row)];
      if (r < 0) continue;
      if (w.group < 0) w.group = row_group_[static_cast<std::size_t>(r)];
      wt.emplace_back(row_local_[static_cast<std::size_t>(r)], c.atom, c.coef);
    }
    const int nrows = w.group >= 0 ? static_cast<int>(groups_[static_cast<std::size_t>(w.group)].rows.size()) : 0;
    w.W.resize(nrows, static_cast<Index>(blk.atoms.size()));
    w.W.setFromTriplets(wt.begin(), wt.end());
    if (w.group >= 0) groups_[static_cast<std::size_t>(w.group)].blocks.push_back(static_cast<int>(bi));
    blocks_.push_back(std::move(w));
  }

  // Equilibrate rows to unit norm; y is mapped back in package().
  VectorXd norm2 = VectorXd::Zero(m);
  for (const auto& w : blocks_) {
    if (w.group < 0) continue;
    const auto& g = groups_[static_cast<std::size_t>(w.group)];
    for (Index c = 0; c < w.W.outerSize(); ++c)
      for (SpMat::InnerIterator it(w.W, c); it; ++it)
        norm2[g.rows[static_cast<std::size_t>(it.row())]] += it.value() * it.value() * w.atoms[static_cast<std::size_t>(c)].frob2;
  }
  for (Index c = 0; c < B_.outerSize(); ++c)
    for (SpMat::InnerIterator it(B_, c); it; ++it) norm2[it.row()] += it.value() * it.value();
  row_scale_ = VectorXd::Ones(m);
  for (Index r = 0; r < m; ++r)
    if (norm2[r] > 0.0) row_scale_[r] = 1.0 / std::sqrt(norm2[r]);
  b_ = b_.cwiseProduct(row_scale_);
  B_ = row_scale_.asDiagonal() * B_;
  for (auto& w : blocks_) {
    if (w.group < 0) continue;
    const auto& g = groups_[static_cast<std::size_t>(w.group)];
    for (Index c = 0; c < w.W.outerSize(); ++c)
      for (SpMat::InnerIterator it(w.W, c); it; ++it) it.valueRef() *= row_scale_[g.rows[static_cast<std::size_t>(it.row())]];
  }
  if (f > 0) {
    Eigen::HouseholderQR<MatrixXd> qr{MatrixXd(B_)};
    Q_ = qr.householderQ();
    R_ = qr.matrixQR().topRows(f).triangularView<Eigen::Upper>();
  }
}

VectorXd Solver::apply_A(const std::vector<MatrixXd>& K) const {
  VectorXd out = VectorXd::Zero(b_.size());
  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    const auto& w = blocks_[bi];
    if (w.group < 0) continue;
    VectorXd tr(static_cast<Index>(w.atoms.size()));
    for (std::size_t k = 0; k < w.atoms.size(); ++k) tr[static_cast<Index>(k)] = atom_trace(w.atoms[k], K[bi]);
    VectorXd local = w.W * tr;
    const auto& g = groups_[static_cast<std::size_t>(w.group)];
    for (Index i = 0; i < local.size(); ++i) out[g.rows[static_cast<std::size_t>(i)]] += local[i];
  }
  return out;
}

MatrixXd Solver::apply_At(int bi, const VectorXd& y) const {
  const auto& w = blocks_[static_cast<std::size_t>(bi)];
  MatrixXd out = MatrixXd::Zero(w.dim, w.dim);
  if (w.group < 0) return out;
  const auto& g = groups_[static_cast<std::size_t>(w.group)];
  VectorXd yl(static_cast<Index>(g.rows.size()));
  for (std::size_t i = 0; i < g.rows.size(); ++i) yl[static_cast<Index>(i)] = y[g.rows[i]];
  VectorXd wt = w.W.transpose() * yl;
  for (std::size_t k = 0; k < w.atoms.size(); ++k) {
    const double c = wt[static_cast<Index>(k)];
    if (c == 0.0) continue;
    const auto& a = w.atoms[k];
    for (std::size_t t = 0; t < a.p.size(); ++t) out(a.p[t], a.q[t]) += c * a.v[t];
  }
  return out;
}

bool Solver::build_and_factor() {
  form_schur();
  return factor();
}

void Solver::form_schur() {
  for (auto& g : groups_) g.M = MatrixXd::Zero(static_cast<Index>(g.rows.size()), static_cast<Index>(g.rows.size()));
  for (auto& w : blocks_) {
    if (w.group < 0) continue;
    const Index K = static_cast<Index>(w.atoms.size());
    const int s = w.dim;
    // H(k, l) = tr(E_k X E_l Z) = sum_{(r,c) in E_l} e_rc G_k(c, r), G_k = Z E_k X.
    MatrixXd H(K, K);
    MatrixXd G(s, s);
    for (Index k = 0; k < K; ++k) {
      const auto& a = w.atoms[static_cast<std::size_t>(k)];
      const Index nk = static_cast<Index>(a.p.size());
      if (nk == 0) {
        H.row(k).setZero();
        continue;
      }
      if (nk > 2 * s) {
        MatrixXd E = MatrixXd::Zero(s, s);
        for (Index t = 0; t < nk; ++t) E(a.p[static_cast<std::size_t>(t)], a.q[static_cast<std::size_t>(t)]) += a.v[static_cast<std::size_t>(t)];
        G.noalias() = w.Z * E * w.X;
      } else {
        MatrixXd U(s, nk);
        MatrixXd V(nk, s);
        for (Index t = 0; t < nk; ++t) {
          U.col(t) = w.Z.col(a.p[static_cast<std::size_t>(t)]) * a.v[static_cast<std::size_t>(t)];
          V.row(t) = w.X.row(a.q[static_cast<std::size_t>(t)]);
        }
        G.noalias() = U * V;
      }
      for (Index l = 0; l < K; ++l) {
        const auto& al = w.atoms[static_cast<std::size_t>(l)];
        double sum = 0.0;
        for (std::size_t t = 0; t < al.p.size(); ++t) sum += al.v[t] * G(al.q[t], al.p[t]);
        H(k, l) = sum;
      }
    }
    sym_inplace(H);
    MatrixXd T = H * w.W.transpose();
    groups_[static_cast<std::size_t>(w.group)].M.noalias() += w.W * T;
  }
  for (auto& g : groups_) sym_inplace(g.M);
}

bool Solver::factor() {
  use_lu_ = false;
  const Index m = b_.size();
  const Index f = cf_.size();
  for (auto& g : groups_) {
    if (f == 0) {
      g.llt.compute(g.M);
      if (g.llt.info() != Eigen::Success) use_lu_ = true;
    }
  }
  if (f > 0) {
    const Index nz = m - f;
    MatrixXd P(nz, nz);
    if (nz > 0) {
      MatrixXd T(m, nz);
      for (const auto& g : groups_) {
        const Index mg = static_cast<Index>(g.rows.size());
        MatrixXd Qg(mg, nz);
        for (Index i = 0; i < mg; ++i) Qg.row(i) = Q_.block(g.rows[static_cast<std::size_t>(i)], f, 1, nz);
        MatrixXd Tg = g.M * Qg;
        for (Index i = 0; i < mg; ++i) T.row(g.rows[static_cast<std::size_t>(i)]) = Tg.row(i);
      }
      P.triangularView<Eigen::Lower>() = Q_.rightCols(nz).transpose() * T;
      pfac_.compute(P);
      if (pfac_.info() != Eigen::Success) use_lu_ = true;
    }
  }
  if (use_lu_) {
    MatrixXd full = MatrixXd::Zero(m + f, m + f);
    for (const auto& g : groups_)
      for (std::size_t i = 0; i < g.rows.size(); ++i)
        for (std::size_t j = 0; j < g.rows.size(); ++j)
          full(g.rows[i], g.rows[j]) = g.M(static_cast<Index>(i), static_cast<Index>(j));
    for (Index c = 0; c < B_.outerSize(); ++c)
      for (SpMat::InnerIterator it(B_, c); it; ++it) {
        full(it.row(), m + it.col()) = it.value();
        full(m + it.col(), it.row()) = it.value();
      }
    lu_.compute(full);
    const double rc = lu_.rcond();
    if (!(rc > 1e-300)) return false;
  }
  return true;
}

void Solver::solve_once(const VectorXd& h, const VectorXd& rf, VectorXd& dy, VectorXd& dx) const {
  const Index m = b_.size();
  const Index f = cf_.size();
  if (use_lu_) {
    VectorXd rhs(m + f);
    rhs << h, rf;
    VectorXd sol = lu_.solve(rhs);
    dy = sol.head(m);
    dx = sol.tail(f);
    return;
  }
  if (f == 0) {
    dy.resize(m);
    for (const auto& g : groups_) {
      VectorXd hg(static_cast<Index>(g.rows.size()));
      for (std::size_t i = 0; i < g.rows.size(); ++i) hg[static_cast<Index>(i)] = h[g.rows[i]];
      VectorXd tg = g.llt.solve(hg);
      for (std::size_t i = 0; i < g.rows.size(); ++i) dy[g.rows[i]] = tg[static_cast<Index>(i)];
    }
    dx.resize(0);
    return;
  }
  // dy = Q1 R^-T rf + Q2 w ; (Q2' M Q2) w = Q2' (h - M y1) ; R dx = Q1' (h - M dy).
  const Index nz = m - f;
  VectorXd u = R_.transpose().triangularView<Eigen::Lower>().solve(rf);
  dy = Q_.leftCols(f) * u;
  if (nz > 0) {
    VectorXd w = Q_.rightCols(nz).transpose() * (h - apply_M(dy));
    w = pfac_.solve(w);
    dy.noalias() += Q_.rightCols(nz) * w;
  }
  VectorXd r = Q_.leftCols(f).transpose() * (h - apply_M(dy));
  dx = R_.triangularView<Eigen::Upper>().solve(r);
}

VectorXd Solver::apply_M(const VectorXd& v) const {
  VectorXd out(v.size());
  for (const auto& g : groups_) {
    VectorXd vg(static_cast<Index>(g.rows.size()));
    for (std::size_t i = 0; i < g.rows.size(); ++i) vg[static_cast<Index>(i)] = v[g.rows[i]];
    VectorXd og = g.M * vg;
    for (std::size_t i = 0; i < g.rows.size(); ++i) out[g.rows[i]] = og[static_cast<Index>(i)];
  }
  return out;
}

void Solver::solve_kkt(const VectorXd& h, const VectorXd& rf, VectorXd& dy, VectorXd& dx) const {
  solve_once(h, rf, dy, dx);
  // Iterative refinement against the unfactored system.
  for (int pass = 0; pass < 2; ++pass) {
    VectorXd r1 = h - B_ * dx - apply_M(dy);
    VectorXd r2 = rf - B_.transpose() * dy;
    const double scale = 1.0 + h.lpNorm<Eigen::Infinity>() + rf.lpNorm<Eigen::Infinity>();
    if (r1.lpNorm<Eigen::Infinity>() + r2.lpNorm<Eigen::Infinity>() <= 1e-15 * scale) break;
    VectorXd cy, cx;
    solve_once(r1, r2, cy, cx);
    dy += cy;
    dx += cx;
  }
}

void Solver::direction(const std::vector<MatrixXd>& Rd, const VectorXd& rp, const VectorXd& rf,
                       const std::vector<MatrixXd>& G, VectorXd& dy, VectorXd& dx,
                       std::vector<MatrixXd>& dX, std::vector<MatrixXd>& dS) const {
  // dS = Rd - A'dy ; dX = G - X dS Z ; A(dX) + B dx = rp ; B'dy = rf.
  std::vector<MatrixXd> base(blocks_.size());
  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    base[bi] = G[bi];
    if (Rd[bi].squaredNorm() > 0.0) base[bi].noalias() -= blocks_[bi].X * Rd[bi] * blocks_[bi].Z;
  }
  VectorXd h = rp - apply_A(base);
  solve_kkt(h, rf, dy, dx);
  dX.resize(blocks_.size());
  dS.resize(blocks_.size());
  auto recover = [&]() {
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      dS[bi] = Rd[bi] - apply_At(static_cast<int>(bi), dy);
      sym_inplace(dS[bi]);
      dX[bi] = G[bi];
      dX[bi].noalias() -= blocks_[bi].X * dS[bi] * blocks_[bi].Z;
      sym_inplace(dX[bi]);
    }
  };
  recover();
  // Refine against the unassembled operator: the Schur matrix carries the
  // rounding of its formation, the matrix-free residual does not.
  const double scale = 1.0 + rp.lpNorm<Eigen::Infinity>() + (rf.size() ? rf.lpNorm<Eigen::Infinity>() : 0.0);
  double prev = kInf;
  for (int pass = 0; pass < 3; ++pass) {
    VectorXd r1 = rp - apply_A(dX) - B_ * dx;
    VectorXd r2 = rf - B_.transpose() * dy;
    const double err = r1.lpNorm<Eigen::Infinity>() + (r2.size() ? r2.lpNorm<Eigen::Infinity>() : 0.0);
    if (err <= 1e-14 * scale || err >= 0.5 * prev) break;
    prev = err;
    VectorXd cy, cx;
    solve_once(r1, r2, cy, cx);
    dy += cy;
    dx += cx;
    recover();
  }
  // The free step read off the primal equation directly, not through M.
  if (dx.size()) {
    const Index f = dx.size();
    VectorXd r = Q_.leftCols(f).transpose() * (rp - apply_A(dX));
    dx = R_.triangularView<Eigen::Upper>().solve(r);
  }
}

// Projection of the primal iterate onto {A(X) + Bx = b} in the metric of X:
// dX = X A'(dy) X stays inside the cone while |X^-1/2 dX X^-1/2| < 1, which a
// rank-deficient optimum would not survive under a Euclidean projection.
void Solver::polish(VectorXd& xf) {
  const Index m = b_.size();
  if (m == 0) return;
  std::vector<MatrixXd> saved;
  for (auto& w : blocks_) {
    saved.push_back(w.Z);
    w.Z = w.X;
  }
  form_schur();
  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) blocks_[bi].Z = std::move(saved[bi]);
  MatrixXd N = MatrixXd::Zero(m, m);
  for (const auto& g : groups_)
    for (std::size_t i = 0; i < g.rows.size(); ++i)
      for (std::size_t j = 0; j < g.rows.size(); ++j) N(g.rows[i], g.rows[j]) = g.M(static_cast<Index>(i), static_cast<Index>(j));
  // Free variables are weighted by their magnitude.
  const double kappa = 1.0 + (xf.size() ? xf.squaredNorm() / static_cast<double>(xf.size()) : 0.0);
  if (B_.cols() > 0) N += kappa * MatrixXd(B_ * SpMat(B_.transpose()));
  Eigen::LLT<MatrixXd> llt(N);
  if (llt.info() != Eigen::Success) return;
  for (int pass = 0; pass < 3; ++pass) {
    std::vector<MatrixXd> xs;
    for (const auto& w : blocks_) xs.push_back(w.X);
    const VectorXd rp = b_ - apply_A(xs) - B_ * xf;
    if (rp.lpNorm<Eigen::Infinity>() == 0.0) return;
    const VectorXd dy = llt.solve(rp);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& X = blocks_[bi].X;
      xs[bi] += X * apply_At(static_cast<int>(bi), dy) * X;
      sym_inplace(xs[bi]);
      if (Eigen::LLT<MatrixXd>(xs[bi]).info() != Eigen::Success) return;
    }
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) blocks_[bi].X = std::move(xs[bi]);
    if (B_.cols() > 0) xf += kappa * (B_.transpose() * dy);
  }
}

SdpSolution Solver::package(SolveStatus status, const VectorXd& y, const VectorXd& xf, int it) const {
  SdpSolution sol;
  sol.status = status;
  sol.iterations = it;
  sol.dropped_rows = dropped_rows_;
  sol.dropped_free = dropped_free_;
  for (const auto& w : blocks_) {
    sol.X.push_back(w.X);
    sol.S.push_back(w.S);
  }
  sol.y = VectorXd::Zero(sdp_.num_rows());
  for (std::size_t i = 0; i < kept_rows_.size(); ++i)
    sol.y[kept_rows_[i]] = y[static_cast<Index>(i)] * row_scale_[static_cast<Index>(i)];
  sol.x_free = VectorXd::Zero(sdp_.num_free());
  for (std::size_t j = 0; j < kept_free_.size(); ++j) sol.x_free[kept_free_[j]] = xf[static_cast<Index>(j)];

  double pobj = sdp_.c_free.size() ? sdp_.c_free.dot(sol.x_free) : 0.0;
  for (const auto& w : blocks_) pobj += (w.C.cwiseProduct(w.X)).sum();
  const double dobj = sdp_.b.size() ? sdp_.b.dot(sol.y) : 0.0;
  sol.primal_objective = pobj;
  sol.dual_objective = dobj;
  sol.relative_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
  VectorXd rp = primal_residual(sdp_, sol.X, sol.x_free);
  sol.primal_infeasibility = rp.size() ? rp.lpNorm<Eigen::Infinity>() / (1.0 + sdp_.b.lpNorm<Eigen::Infinity>()) : 0.0;
  double dinf = 0.0;
  double cnorm = 0.0;
  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    MatrixXd rd = blocks_[bi].C - apply_At(static_cast<int>(bi), y) - blocks_[bi].S;
    dinf = std::max(dinf, rd.cwiseAbs().maxCoeff());
    cnorm = std::max(cnorm, blocks_[bi].C.cwiseAbs().maxCoeff());
  }
  if (sdp_.num_free() > 0) {
    VectorXd rf = sdp_.c_free;
    for (const auto& e : sdp_.free_entries) rf[e.var] -= e.coef * sol.y[e.row];
    dinf = std::max(dinf, rf.lpNorm<Eigen::Infinity>());
    cnorm = std::max(cnorm, sdp_.c_free.lpNorm<Eigen::Infinity>());
  }
  sol.dual_infeasibility = dinf / (1.0 + cnorm);
  return sol;
}

SdpSolution Solver::run() {
  setup();
  const Index m = b_.size();
  const Index f = cf_.size();

  VectorXd y = VectorXd::Zero(m);
  VectorXd xf = VectorXd::Zero(f);
  if (infeasible_rows_) {
    for (auto& w : blocks_) {
      w.X = MatrixXd::Identity(w.dim, w.dim);
      w.S = MatrixXd::Identity(w.dim, w.dim);
    }
    return package(SolveStatus::PrimalInfeasible, y, xf, 0);
  }

  // Cold start: scaled identities sized from the data norms.
  std::vector<double> row_norm2(static_cast<std::size_t>(m), 0.0);
  for (auto& w : blocks_) {
    if (w.group < 0) continue;
    const auto& g = groups_[static_cast<std::size_t>(w.group)];
    for (Index c = 0; c < w.W.outerSize(); ++c)
      for (SpMat::InnerIterator it(w.W, c); it; ++it)
        row_norm2[static_cast<std::size_t>(g.rows[static_cast<std::size_t>(it.row())])] +=
            it.value() * it.value() * w.atoms[static_cast<std::size_t>(c)].frob2;
  }
  for (auto& w : blocks_) {
    const double sq = std::sqrt(static_cast<double>(w.dim));
    double xi = std::max(10.0, sq);
    double eta = std::max(10.0, sq);
    if (w.group >= 0) {
      const auto& g = groups_[static_cast<std::size_t>(w.group)];
      for (int r : g.rows) {
        const double an = std::sqrt(row_norm2[static_cast<std::size_t>(r)]);
        xi = std::max(xi, sq * (1.0 + std::abs(b_[r])) / (1.0 + an));
        eta = std::max(eta, an);
      }
    }
    eta = std::max(eta, w.C.norm());
    if (f > 0) eta = std::max(eta, cf_.lpNorm<Eigen::Infinity>());
    w.X = xi * MatrixXd::Identity(w.dim, w.dim);
    w.S = eta * MatrixXd::Identity(w.dim, w.dim);
  }

  const double bnorm = b_.size() ? b_.lpNorm<Eigen::Infinity>() : 0.0;
  double cnorm = f ? cf_.lpNorm<Eigen::Infinity>() : 0.0;
  for (const auto& w : blocks_) cnorm = std::max(cnorm, w.C.cwiseAbs().maxCoeff());

  double prev_p = 1.0;
  double prev_d = 1.0;
  int stall = 0;
  int since_best = 0;
  constexpr int kPatience = 15;

  struct Best {
    double merit = kInf;
    std::vector<MatrixXd> X, S;
    VectorXd y, xf;
  } best;
  auto remember = [&](double merit) {
    if (merit >= best.merit) return;
    best.merit = merit;
    best.X.clear();
    best.S.clear();
    for (const auto& w : blocks_) {
      best.X.push_back(w.X);
      best.S.push_back(w.S);
    }
    best.y = y;
    best.xf = xf;
  };
  auto restore_best = [&]() {
    if (best.merit == kInf) return;
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      blocks_[bi].X = best.X[bi];
      blocks_[bi].S = best.S[bi];
    }
    y = best.y;
    xf = best.xf;
  };

  // Termination: polish the primal, then report Optimal only if the unscaled
  // residuals and gap meet the fallback tolerance.
  auto finish = [&](SolveStatus status, int it, bool from_best) {
    if (from_best) restore_best();
    polish(xf);
    SdpSolution s = package(status, y, xf, it);
    const bool met = s.relative_gap <= opts_.fallback_tol && s.primal_infeasibility <= opts_.fallback_tol &&
                     s.dual_infeasibility <= opts_.fallback_tol;
    if (met) s.status = SolveStatus::Optimal;
    else if (status == SolveStatus::Optimal) s.status = SolveStatus::NumericalTrouble;
    return s;
  };
  auto finish_stalled = [&](int it) { return finish(SolveStatus::NumericalTrouble, it, true); };

  for (int it = 0; it <= opts_.max_iterations; ++it) {
    // Residuals and objectives.
    // Infeasibilities are relative to the magnitude of the terms they balance.
    const VectorXd ax = apply_A([&] {
      std::vector<MatrixXd> xs;
      for (const auto& w : blocks_) xs.push_back(w.X);
      return xs;
    }());
    const VectorXd bx = B_ * xf;
    VectorXd rp = b_ - ax - bx;
    const VectorXd bty = B_.transpose() * y;
    VectorXd rf = cf_ - bty;
    std::vector<MatrixXd> Rd(blocks_.size());
    double rd_max = 0.0;
    double gapxs = 0.0;
    double pobj = f ? cf_.dot(xf) : 0.0;
    double aty_s_norm = 0.0;
    double dscale = std::max(cnorm, f ? bty.lpNorm<Eigen::Infinity>() : 0.0);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      auto& w = blocks_[bi];
      MatrixXd aty = apply_At(static_cast<int>(bi), y);
      Rd[bi] = w.C - aty - w.S;
      rd_max = std::max(rd_max, Rd[bi].cwiseAbs().maxCoeff());
      aty_s_norm = std::max(aty_s_norm, (aty + w.S).cwiseAbs().maxCoeff());
      dscale = std::max({dscale, aty.cwiseAbs().maxCoeff(), w.S.cwiseAbs().maxCoeff()});
      gapxs += w.X.cwiseProduct(w.S).sum();
      pobj += w.C.cwiseProduct(w.X).sum();
    }
    const double dobj = m ? b_.dot(y) : 0.0;
    const double mu = nsum_ > 0 ? gapxs / nsum_ : 0.0;
    const double pscale = m ? std::max({bnorm, ax.lpNorm<Eigen::Infinity>(), bx.lpNorm<Eigen::Infinity>()}) : 0.0;
    const double pinf = (m ? rp.lpNorm<Eigen::Infinity>() : 0.0) / (1.0 + pscale);
    const double dinf = std::max(rd_max, f ? rf.lpNorm<Eigen::Infinity>() : 0.0) / (1.0 + dscale);
    const double relgap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));

    if (opts_.verbose)
      std::fprintf(stderr, "%3d  pobj % .10e  dobj % .10e  gap %.2e  pinf %.2e  dinf %.2e  mu %.2e  step %.2f %.2f\n", it, pobj,
                   dobj, relgap, pinf, dinf, mu, prev_p, prev_d);

    const double merit = std::max({relgap, pinf, dinf});
    if (merit < best.merit) since_best = 0;
    else if (++since_best >= kPatience) {
      if (opts_.verbose) std::fprintf(stderr, "stop: no progress\n");
      return finish_stalled(it);
    }
    remember(merit);
    if (relgap <= opts_.gap_tol && pinf <= opts_.feas_tol && dinf <= opts_.feas_tol)
      return finish(SolveStatus::Optimal, it, false);

    // Farkas-type certificates from diverging iterates.
    if (dobj > 0.0) {
      const double bty_f = f ? (B_.transpose() * y).lpNorm<Eigen::Infinity>() : 0.0;
      if (aty_s_norm / dobj < opts_.infeasibility_tol && bty_f / dobj < opts_.infeasibility_tol && dobj > 1e3)
        return package(SolveStatus::PrimalInfeasible, y, xf, it);
    }
    if (pobj < 0.0) {
      const double axb = (b_ - rp).lpNorm<Eigen::Infinity>();
      if (axb / -pobj < opts_.infeasibility_tol && -pobj > 1e3)
        return package(SolveStatus::DualInfeasible, y, xf, it);
    }
    if (it == opts_.max_iterations) break;

    for (auto& w : blocks_) {
      Eigen::LLT<MatrixXd> llt(w.S);
      if (llt.info() != Eigen::Success) {
        if (opts_.verbose) std::fprintf(stderr, "stop: S lost definiteness\n");
        return finish_stalled(it);
      }
      w.Z = llt.solve(MatrixXd::Identity(w.dim, w.dim));
      sym_inplace(w.Z);
    }
    if (!build_and_factor()) {
      if (opts_.verbose) std::fprintf(stderr, "stop: singular Newton system\n");
      return finish_stalled(it);
    }

    // Predictor.
    std::vector<MatrixXd> G(blocks_.size());
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) G[bi] = -blocks_[bi].X;
    VectorXd dy, dx;
    std::vector<MatrixXd> dX, dS;
    direction(Rd, rp, rf, G, dy, dx, dX, dS);
    double ap = 1.0;
    double ad = 1.0;
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      ap = std::min(ap, max_step(blocks_[bi].X, dX[bi]));
      ad = std::min(ad, max_step(blocks_[bi].S, dS[bi]));
    }
    double mu_aff = 0.0;
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi)
      mu_aff += ((blocks_[bi].X + ap * dX[bi]).cwiseProduct(blocks_[bi].S + ad * dS[bi])).sum();
    mu_aff /= nsum_;
    const double smin = std::min(ap, ad);
    double expon = 1.0;
    if (mu > 1e-6) {
      expon = smin < 1.0 / std::sqrt(3.0) ? 1.0 : std::max(1.0, 3.0 * smin * smin);
    } else {
      expon = std::max(1.0, std::min(3.0, 3.0 * smin * smin));
    }
    const double sigma = mu > 0 ? std::min(1.0, std::pow(std::max(mu_aff, 0.0) / mu, expon)) : 0.0;

    // Corrector.
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      auto& w = blocks_[bi];
      G[bi] = sigma * mu * w.Z - w.X;
      G[bi].noalias() -= dX[bi] * dS[bi] * w.Z;
    }
    direction(Rd, rp, rf, G, dy, dx, dX, dS);
    double mp = kInf;
    double md = kInf;
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      mp = std::min(mp, max_step(blocks_[bi].X, dX[bi]));
      md = std::min(md, max_step(blocks_[bi].S, dS[bi]));
    }
    const double gam = 0.9 + 0.09 * std::min(prev_p, prev_d);
    double step_p = std::min(1.0, gam * mp);
    double step_d = std::min(1.0, gam * md);
    if (!std::isfinite(dy.sum()) || (f && !std::isfinite(dx.sum()))) return finish_stalled(it);

    // Rounding can leave the trial point just outside the cone; back off until
    // every block factors.
    auto advance = [&](bool primal, double& step) {
      for (int tries = 0; tries < 30; ++tries) {
        bool ok = true;
        std::vector<MatrixXd> trial(blocks_.size());
        for (std::size_t bi = 0; bi < blocks_.size() && ok; ++bi) {
          trial[bi] = primal ? MatrixXd(blocks_[bi].X + step * dX[bi]) : MatrixXd(blocks_[bi].S + step * dS[bi]);
          sym_inplace(trial[bi]);
          ok = Eigen::LLT<MatrixXd>(trial[bi]).info() == Eigen::Success;
        }
        if (ok) {
          for (std::size_t bi = 0; bi < blocks_.size(); ++bi) (primal ? blocks_[bi].X : blocks_[bi].S) = std::move(trial[bi]);
          return;
        }
        step *= 0.8;
      }
      step = 0.0;
    };
    advance(true, step_p);
    advance(false, step_d);
    if (f) xf += step_p * dx;
    y += step_d * dy;
    prev_p = step_p;
    prev_d = step_d;

    if (std::max(step_p, step_d) < 1e-7) {
      if (++stall >= 3) {
        if (opts_.verbose) std::fprintf(stderr, "stop: step lengths collapsed\n");
        return finish_stalled(it + 1);
      }
    } else {
      stall = 0;
    }
  }
  return finish(SolveStatus::MaxIterations, opts_.max_iterations, true);
}

}  // namespace

SdpSolution solve(const BlockSdp& sdp, const SolverOptions& opts) {
  Solver solver(sdp, opts);
  return solver.run();
}

}  // namespace stochsafe::sdp
