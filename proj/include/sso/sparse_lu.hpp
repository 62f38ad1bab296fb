#pragma once

// Left-looking sparse LU with threshold partial pivoting (Gilbert-Peierls),
// on compressed-column storage, with an AMD fill-reducing column order.
//
// Factorization: P A Q = L U, L unit lower triangular (diagonal stored first
// in each column), U upper triangular (diagonal stored last in each column).

#include "sso/core.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/Sparse>

#include <cmath>
#include <optional>
#include <vector>

namespace sso {

struct SparseLUOptions {
  /// Keep the diagonal as pivot when |a_jj| >= threshold * max |a_ij|.
  double pivot_threshold = 0.01;
  /// A pivot with |p| <= singular_tolerance * max|A(:,j)| marks column j
  /// singular.
  double singular_tolerance = 1e-11;
  bool use_amd = true;
};

class SparseLU {
 public:
  using CscMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

  /// Factorizes A. Returns the original column index of the first singular
  /// pivot, if any; the factorization is unusable in that case.
  std::optional<Index> factorize(const CscMatrix& A, const SparseLUOptions& opt = {}) {
    if (A.rows() != A.cols()) throw Error("SparseLU: matrix is not square");
    n_ = static_cast<int>(A.rows());
    const int n = n_;
    CscMatrix Ac = A;
    Ac.makeCompressed();
    const int* Ap = Ac.outerIndexPtr();
    const int* Ai = Ac.innerIndexPtr();
    const double* Ax = Ac.valuePtr();

    q_.resize(static_cast<std::size_t>(n));
    if (opt.use_amd) {
      Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm;
      Eigen::AMDOrdering<int> amd;
      amd(Ac, perm);
      // perm lists original columns in elimination order.
      for (int i = 0; i < n; ++i) q_[static_cast<std::size_t>(i)] = perm.indices()(i);
      defer_zero_diagonals(Ac);
    } else {
      for (int i = 0; i < n; ++i) q_[static_cast<std::size_t>(i)] = i;
    }

    std::vector<double> colmax(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; ++j)
      for (int p = Ap[j]; p < Ap[j + 1]; ++p) colmax[static_cast<std::size_t>(j)] = std::max(colmax[j], std::abs(Ax[p]));

    const std::size_t guess = static_cast<std::size_t>(4 * Ac.nonZeros() + n);
    Lp_.assign(static_cast<std::size_t>(n + 1), 0);
    Up_.assign(static_cast<std::size_t>(n + 1), 0);
    Li_.clear(), Lx_.clear(), Ui_.clear(), Ux_.clear();
    Li_.reserve(guess), Lx_.reserve(guess), Ui_.reserve(guess), Ux_.reserve(guess);
    pinv_.assign(static_cast<std::size_t>(n), -1);

    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    std::vector<int> xi(static_cast<std::size_t>(n)), stack(static_cast<std::size_t>(n)),
        pstack(static_cast<std::size_t>(n));
    std::vector<int> mark(static_cast<std::size_t>(n), -1);

    for (int k = 0; k < n; ++k) {
      Lp_[static_cast<std::size_t>(k)] = static_cast<int>(Li_.size());
      Up_[static_cast<std::size_t>(k)] = static_cast<int>(Ui_.size());
      const int col = q_[static_cast<std::size_t>(k)];

      // Nonzero pattern of x = L \ A(:,col) by depth-first search over L.
      int top = n;
      for (int p = Ap[col]; p < Ap[col + 1]; ++p) {
        const int r = Ai[p];
        if (mark[static_cast<std::size_t>(r)] == k) continue;
        top = dfs(r, k, top, xi, stack, pstack, mark);
      }
      for (int p = top; p < n; ++p) x[static_cast<std::size_t>(xi[p])] = 0.0;
      for (int p = Ap[col]; p < Ap[col + 1]; ++p) x[static_cast<std::size_t>(Ai[p])] = Ax[p];
      for (int px = top; px < n; ++px) {
        const int j = xi[static_cast<std::size_t>(px)];
        const int J = pinv_[static_cast<std::size_t>(j)];
        if (J < 0) continue;
        const double xj = x[static_cast<std::size_t>(j)];  // unit diagonal
        for (int p = Lp_[static_cast<std::size_t>(J)] + 1; p < Lp_[static_cast<std::size_t>(J) + 1]; ++p)
          x[static_cast<std::size_t>(Li_[static_cast<std::size_t>(p)])] -= Lx_[static_cast<std::size_t>(p)] * xj;
      }

      // Pivot selection.
      int ipiv = -1;
      double amax = -1.0;
      for (int p = top; p < n; ++p) {
        const int i = xi[static_cast<std::size_t>(p)];
        const double xv = x[static_cast<std::size_t>(i)];
        if (pinv_[static_cast<std::size_t>(i)] < 0) {
          if (std::abs(xv) > amax) {
            amax = std::abs(xv);
            ipiv = i;
          }
        } else {
          Ui_.push_back(pinv_[static_cast<std::size_t>(i)]);
          Ux_.push_back(xv);
        }
      }
      const double scale = colmax[static_cast<std::size_t>(col)];
      if (ipiv < 0 || !(amax > opt.singular_tolerance * scale) || !std::isfinite(amax)) {
        valid_ = false;
        return col;
      }
      if (pinv_[static_cast<std::size_t>(col)] < 0 && mark[static_cast<std::size_t>(col)] == k &&
          std::abs(x[static_cast<std::size_t>(col)]) >= opt.pivot_threshold * amax)
        ipiv = col;

      const double pivot = x[static_cast<std::size_t>(ipiv)];
      Ui_.push_back(k);
      Ux_.push_back(pivot);
      pinv_[static_cast<std::size_t>(ipiv)] = k;
      Li_.push_back(ipiv);
      Lx_.push_back(1.0);
      for (int p = top; p < n; ++p) {
        const int i = xi[static_cast<std::size_t>(p)];
        if (pinv_[static_cast<std::size_t>(i)] < 0) {
          const double v = x[static_cast<std::size_t>(i)] / pivot;
          if (v != 0.0) {
            Li_.push_back(i);
            Lx_.push_back(v);
          }
        }
        x[static_cast<std::size_t>(i)] = 0.0;
      }
    }
    Lp_[static_cast<std::size_t>(n)] = static_cast<int>(Li_.size());
    Up_[static_cast<std::size_t>(n)] = static_cast<int>(Ui_.size());
    for (auto& i : Li_) i = pinv_[static_cast<std::size_t>(i)];
    valid_ = true;
    return std::nullopt;
  }

  /// Solves A x = b.
  VectorXd solve(const VectorXd& b) const {
    check(b);
    const int n = n_;
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(pinv_[static_cast<std::size_t>(i)])] = b(i);
    for (int j = 0; j < n; ++j) {  // L
      const double xj = x[static_cast<std::size_t>(j)];
      for (int p = Lp_[j] + 1; p < Lp_[j + 1]; ++p) x[static_cast<std::size_t>(Li_[p])] -= Lx_[p] * xj;
    }
    for (int j = n - 1; j >= 0; --j) {  // U
      x[static_cast<std::size_t>(j)] /= Ux_[static_cast<std::size_t>(Up_[j + 1] - 1)];
      const double xj = x[static_cast<std::size_t>(j)];
      for (int p = Up_[j]; p < Up_[j + 1] - 1; ++p) x[static_cast<std::size_t>(Ui_[p])] -= Ux_[p] * xj;
    }
    VectorXd out(n);
    for (int k = 0; k < n; ++k) out(q_[static_cast<std::size_t>(k)]) = x[static_cast<std::size_t>(k)];
    return out;
  }

  /// Solves Aᵀ x = b with the same factors.
  VectorXd solve_transpose(const VectorXd& b) const {
    check(b);
    const int n = n_;
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) x[static_cast<std::size_t>(k)] = b(q_[static_cast<std::size_t>(k)]);
    for (int j = 0; j < n; ++j) {  // Uᵀ
      double s = x[static_cast<std::size_t>(j)];
      for (int p = Up_[j]; p < Up_[j + 1] - 1; ++p) s -= Ux_[p] * x[static_cast<std::size_t>(Ui_[p])];
      x[static_cast<std::size_t>(j)] = s / Ux_[static_cast<std::size_t>(Up_[j + 1] - 1)];
    }
    for (int j = n - 1; j >= 0; --j) {  // Lᵀ
      double s = x[static_cast<std::size_t>(j)];
      for (int p = Lp_[j] + 1; p < Lp_[j + 1]; ++p) s -= Lx_[p] * x[static_cast<std::size_t>(Li_[p])];
      x[static_cast<std::size_t>(j)] = s;
    }
    VectorXd out(n);
    for (int i = 0; i < n; ++i) out(i) = x[static_cast<std::size_t>(pinv_[static_cast<std::size_t>(i)])];
    return out;
  }

  Index rows() const { return n_; }
  std::size_t factor_nonzeros() const { return Lx_.size() + Ux_.size(); }
  bool valid() const { return valid_; }

 private:
  void check(const VectorXd& b) const {
    if (!valid_) throw NumericalError("SparseLU: no valid factorization");
    if (b.size() != n_) throw Error("SparseLU: right-hand side has wrong length");
  }

  // Moves every column with a structurally zero diagonal (a multiplier in a
  // saddle-point system) to just after its last-ordered neighbour, so the
  // constrained unknown and its multiplier are eliminated as a pair and the
  // diagonal pivot stays usable.
  void defer_zero_diagonals(const CscMatrix& A) {
    const int n = n_;
    std::vector<int> pos(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) pos[static_cast<std::size_t>(q_[static_cast<std::size_t>(k)])] = k;
    std::vector<char> zero_diag(static_cast<std::size_t>(n), 1);
    for (int j = 0; j < n; ++j)
      for (typename CscMatrix::InnerIterator it(A, j); it; ++it)
        if (it.row() == j && it.value() != 0.0) zero_diag[static_cast<std::size_t>(j)] = 0;
    // anchor[j]: position of the last-ordered regular neighbour, via rows and columns.
    std::vector<int> anchor(static_cast<std::size_t>(n), -1);
    for (int j = 0; j < n; ++j)
      for (typename CscMatrix::InnerIterator it(A, j); it; ++it) {
        const int i = static_cast<int>(it.row());
        if (zero_diag[static_cast<std::size_t>(j)] && !zero_diag[static_cast<std::size_t>(i)])
          anchor[static_cast<std::size_t>(j)] = std::max(anchor[static_cast<std::size_t>(j)], pos[static_cast<std::size_t>(i)]);
        if (zero_diag[static_cast<std::size_t>(i)] && !zero_diag[static_cast<std::size_t>(j)])
          anchor[static_cast<std::size_t>(i)] = std::max(anchor[static_cast<std::size_t>(i)], pos[static_cast<std::size_t>(j)]);
      }
    std::vector<std::vector<int>> after(static_cast<std::size_t>(n));
    std::vector<int> orphans;
    for (int k = 0; k < n; ++k) {
      const int j = q_[static_cast<std::size_t>(k)];
      if (!zero_diag[static_cast<std::size_t>(j)]) continue;
      if (anchor[static_cast<std::size_t>(j)] >= 0) after[static_cast<std::size_t>(anchor[static_cast<std::size_t>(j)])].push_back(j);
      else orphans.push_back(j);
    }
    std::vector<int> q;
    q.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      const int j = q_[static_cast<std::size_t>(k)];
      if (zero_diag[static_cast<std::size_t>(j)]) continue;
      q.push_back(j);
      for (int z : after[static_cast<std::size_t>(k)]) q.push_back(z);
    }
    for (int z : orphans) q.push_back(z);
    q_ = std::move(q);
  }

  // Depth-first search from row r through the columns of L already computed;
  // pushes finished nodes onto xi[top-1], xi[top-2], ... (topological order).
  int dfs(int r, int stamp, int top, std::vector<int>& xi, std::vector<int>& stack, std::vector<int>& pstack,
          std::vector<int>& mark) const {
    int head = 0;
    stack[0] = r;
    while (head >= 0) {
      const int j = stack[static_cast<std::size_t>(head)];
      const int J = pinv_[static_cast<std::size_t>(j)];
      if (mark[static_cast<std::size_t>(j)] != stamp) {
        mark[static_cast<std::size_t>(j)] = stamp;
        pstack[static_cast<std::size_t>(head)] = J < 0 ? 0 : Lp_[static_cast<std::size_t>(J)] + 1;
      }
      bool done = true;
      const int pend = J < 0 ? 0 : Lp_[static_cast<std::size_t>(J) + 1];
      for (int p = pstack[static_cast<std::size_t>(head)]; p < pend; ++p) {
        const int i = Li_[static_cast<std::size_t>(p)];
        if (mark[static_cast<std::size_t>(i)] == stamp) continue;
        pstack[static_cast<std::size_t>(head)] = p + 1;
        stack[static_cast<std::size_t>(++head)] = i;
        done = false;
        break;
      }
      if (done) {
        --head;
        xi[static_cast<std::size_t>(--top)] = j;
      }
    }
    return top;
  }

  int n_ = 0;
  bool valid_ = false;
  std::vector<int> q_, pinv_;
  std::vector<int> Lp_, Li_, Up_, Ui_;
  std::vector<double> Lx_, Ux_;
};

}  // namespace sso
