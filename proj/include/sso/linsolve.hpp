#pragma once

// Direct solvers for the augmented system, with a reusable factorization
// handle for adjoint solves.

#include "sso/assembly.hpp"
#include "sso/core.hpp"
#include "sso/model.hpp"
#include "sso/sparse_lu.hpp"

#include <Eigen/LU>

#include <atomic>
#include <limits>
#include <memory>
#include <string>

namespace sso {

enum class SolverKind { DenseLU, SparseLU };

struct SolverChoice {
  SolverKind kind = SolverKind::SparseLU;
  double pivot_threshold = 0.01;       ///< sparse diagonal-preference threshold
  double singular_tolerance = 1e-11;   ///< relative to the column's largest entry
  bool symmetric_hint = true;          ///< verify symmetry and share the forward path for transposes
  int refinement_steps = 2;            ///< iterative refinement passes against the unfactored matrix
};

inline SolverKind parse_solver_kind(const std::string& s) {
  if (s == "dense" || s == "dense_lu") return SolverKind::DenseLU;
  if (s == "sparse" || s == "sparse_lu") return SolverKind::SparseLU;
  throw Error("unknown solver '" + s + "' (expected dense or sparse)");
}

inline const char* solver_name(SolverKind k) { return k == SolverKind::DenseLU ? "dense" : "sparse"; }

/// Process-wide instrumentation: factorizations performed and right-hand
/// sides solved against a factorization (forward or transpose).
struct SolverCounters {
  std::atomic<long> factorizations{0};
  std::atomic<long> solves{0};
  void reset() {
    factorizations = 0;
    solves = 0;
  }
};

inline SolverCounters& solver_counters() {
  static SolverCounters c;
  return c;
}

namespace detail {

inline void require_finite(const AugmentedSystem& s) {
  for (double v : s.K_aug.vals)
    if (!std::isfinite(v)) throw NumericalError("non-finite entry in the system matrix");
  if (!s.f_aug.allFinite()) throw NumericalError("non-finite entry in the right-hand side");
}

[[noreturn]] inline void throw_singular(Index col, Index dof, const StructuralModel* m) {
  if (col < dof && m && static_cast<std::size_t>(col / kDofPerNode) < m->nodes().size()) {
    const int node = m->nodes()[static_cast<std::size_t>(col / kDofPerNode)].id;
    const int comp = static_cast<int>(col % kDofPerNode);
    throw SingularMatrixError("singular system: zero pivot at DOF " + std::to_string(col) + " (node " +
                                  std::to_string(node) + ", " + component_name(comp) +
                                  "); candidate unconstrained DOF",
                              col, node, comp);
  }
  if (col < dof)
    throw SingularMatrixError("singular system: zero pivot at DOF " + std::to_string(col) +
                                  " (node index " + std::to_string(col / kDofPerNode) + ", " +
                                  component_name(static_cast<int>(col % kDofPerNode)) + ")",
                              col);
  throw SingularMatrixError("singular system: zero pivot at multiplier row " + std::to_string(col - dof) +
                                " (redundant or conflicting constraint)",
                            col);
}

struct DenseBackend {
  Eigen::MatrixXd A;
  std::unique_ptr<Eigen::PartialPivLU<Eigen::Ref<Eigen::MatrixXd>>> lu;
};

}  // namespace detail

/// Immutable factorization of K_aug; safe to share across threads.
class Factorization {
 public:
  Factorization() = default;

  Factorization(const AugmentedSystem& sys, const SolverChoice& choice, const StructuralModel* model = nullptr)
      : choice_(choice), n_(sys.K_aug.rows) {
    detail::require_finite(sys);
    if (sys.K_aug.rows != sys.K_aug.cols) throw Error("system matrix is not square");
    symmetric_ = choice.symmetric_hint && is_symmetric(sys.K_aug);
    auto A = std::make_shared<const SparseLU::CscMatrix>(sys.K_aug.to_sparse());
    if (choice.refinement_steps > 0) A_ = A;
    if (choice.kind == SolverKind::SparseLU) {
      auto lu = std::make_shared<SparseLU>();
      SparseLUOptions opt;
      opt.pivot_threshold = choice.pivot_threshold;
      opt.singular_tolerance = choice.singular_tolerance;
      if (auto bad = lu->factorize(*A, opt)) detail::throw_singular(*bad, sys.dof, model);
      sparse_ = std::move(lu);
    } else {
      auto d = std::make_shared<detail::DenseBackend>();
      d->A = sys.K_aug.to_dense();
      const Eigen::VectorXd colmax = d->A.cwiseAbs().colwise().maxCoeff().transpose();
      d->lu = std::make_unique<Eigen::PartialPivLU<Eigen::Ref<Eigen::MatrixXd>>>(d->A);
      // Row pivoting only, so column k of U belongs to variable k.
      for (Index k = 0; k < n_; ++k) {
        const double p = std::abs(d->A(k, k));
        if (!(p > choice.singular_tolerance * colmax(k)) || !std::isfinite(p))
          detail::throw_singular(k, sys.dof, model);
      }
      dense_ = std::move(d);
    }
    ++solver_counters().factorizations;
  }

  /// Solves K_aug x = rhs.
  VectorXd solve(const VectorXd& rhs) const {
    check(rhs);
    ++solver_counters().solves;
    return refine(rhs, false);
  }

  /// Solves K_augᵀ x = rhs. When symmetry was verified this reuses the
  /// forward path.
  VectorXd solve_transpose(const VectorXd& rhs) const {
    if (symmetric_) return solve(rhs);
    check(rhs);
    ++solver_counters().solves;
    return refine(rhs, true);
  }

  Index size() const { return n_; }
  bool symmetric() const { return symmetric_; }
  const SolverChoice& choice() const { return choice_; }
  bool valid() const { return sparse_ || dense_; }

 private:
  VectorXd raw(const VectorXd& rhs, bool transpose) const {
    if (sparse_) return transpose ? sparse_->solve_transpose(rhs) : sparse_->solve(rhs);
    return transpose ? VectorXd(dense_->lu->transpose().solve(rhs)) : VectorXd(dense_->lu->solve(rhs));
  }

  VectorXd refine(const VectorXd& rhs, bool transpose) const {
    VectorXd x = raw(rhs, transpose);
    if (!A_) return x;
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < choice_.refinement_steps; ++k) {
      const VectorXd r = transpose ? VectorXd(rhs - A_->transpose() * x) : VectorXd(rhs - *A_ * x);
      const double rn = r.norm();
      // Stop once the residual no longer shrinks.
      if (!(rn < 0.5 * prev) || rn == 0.0) break;
      prev = rn;
      x += raw(r, transpose);
    }
    return x;
  }

  void check(const VectorXd& rhs) const {
    if (!valid()) throw Error("solve on an empty factorization");
    if (rhs.size() != n_) throw Error("right-hand side length " + std::to_string(rhs.size()) +
                                      " does not match system size " + std::to_string(n_));
    if (!rhs.allFinite()) throw NumericalError("non-finite right-hand side");
  }

  SolverChoice choice_;
  Index n_ = 0;
  bool symmetric_ = false;
  std::shared_ptr<const SparseLU> sparse_;
  std::shared_ptr<const detail::DenseBackend> dense_;
  std::shared_ptr<const SparseLU::CscMatrix> A_;
};

struct Solution {
  VectorXd u;            ///< first dof entries of u_aug
  VectorXd multipliers;  ///< last dof_bc entries of u_aug
  double residual_norm = 0.0;  ///< ‖K_aug u_aug − f_aug‖₂
};

inline Solution solve_with(const Factorization& fac, const AugmentedSystem& sys) {
  const VectorXd x = fac.solve(sys.f_aug);
  if (!x.allFinite()) throw NumericalError("solution contains non-finite values");
  Solution s;
  s.u = x.head(sys.dof);
  s.multipliers = x.tail(sys.dof_bc);
  s.residual_norm = (sys.K_aug.multiply(x) - sys.f_aug).norm();
  return s;
}

inline Solution solve(const AugmentedSystem& sys, const SolverChoice& choice = {},
                      const StructuralModel* model = nullptr) {
  return solve_with(Factorization(sys, choice, model), sys);
}

/// Support reactions per constrained DOF: the negated multipliers.
inline VectorXd reactions(const Solution& s) { return -s.multipliers; }

}  // namespace sso
