#pragma once

// Global assembly: element triplets, load vector, constraint rows and the
// Lagrange-multiplier augmented system
//
//   [ K  Vᵀ ] [ u ]   [ f ]
//   [ V  0  ] [ λ ] = [ b ].

#include "sso/core.hpp"
#include "sso/elements.hpp"
#include "sso/model.hpp"

#include <Eigen/Sparse>

#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

namespace sso {

/// Coordinate-format matrix. Duplicate (row, col) entries are additive.
struct TripletMatrix {
  Index rows = 0, cols = 0;
  std::vector<Index> row_idx, col_idx;
  std::vector<double> vals;

  std::size_t nnz() const { return vals.size(); }

  void push(Index r, Index c, double v) {
    row_idx.push_back(r);
    col_idx.push_back(c);
    vals.push_back(v);
  }

  /// Compressed column form with duplicates summed.
  Eigen::SparseMatrix<double> to_sparse() const {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(vals.size());
    for (std::size_t k = 0; k < vals.size(); ++k) t.emplace_back(row_idx[k], col_idx[k], vals[k]);
    Eigen::SparseMatrix<double> S(rows, cols);
    S.setFromTriplets(t.begin(), t.end());
    return S;
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(rows, cols);
    for (std::size_t k = 0; k < vals.size(); ++k) D(row_idx[k], col_idx[k]) += vals[k];
    return D;
  }

  /// y = A x over the summed matrix.
  VectorXd multiply(const VectorXd& x) const {
    VectorXd y = VectorXd::Zero(rows);
    for (std::size_t k = 0; k < vals.size(); ++k) y(row_idx[k]) += vals[k] * x(col_idx[k]);
    return y;
  }
};

struct AugmentedSystem {
  TripletMatrix K_aug;
  VectorXd f_aug;
  Index dof = 0, dof_bc = 0;
};

/// Concatenated element stiffness triplets in element order (beams, then
/// quads, each in insertion order), row-major within each element. Element
/// work is spread over threads; each element owns a fixed slot range so the
/// result does not depend on the thread count.
inline TripletMatrix assemble_stiffness(const StructuralModel& m) {
  std::vector<ElementRef> refs;
  refs.reserve(m.element_count());
  for (std::size_t b = 0; b < m.beams().size(); ++b) refs.push_back({ElementKind::BeamColumn, b});
  for (std::size_t q = 0; q < m.quads().size(); ++q) refs.push_back({ElementKind::QuadShell, q});

  std::vector<std::size_t> offset(refs.size() + 1, 0);
  for (std::size_t e = 0; e < refs.size(); ++e) {
    const std::size_t n = refs[e].kind == ElementKind::BeamColumn ? 12 : 24;
    offset[e + 1] = offset[e] + n * n;
  }

  TripletMatrix K;
  K.rows = K.cols = m.dof();
  K.row_idx.resize(offset.back());
  K.col_idx.resize(offset.back());
  K.vals.resize(offset.back());

  parallel_for(refs.size(), [&](std::size_t e) {
    const ElementStiffness ke = element_stiffness(m, refs[e]);
    std::size_t k = offset[e];
    const auto n = static_cast<Index>(ke.dofs.size());
    for (Index r = 0; r < n; ++r)
      for (Index c = 0; c < n; ++c, ++k) {
        K.row_idx[k] = ke.dofs[static_cast<std::size_t>(r)];
        K.col_idx[k] = ke.dofs[static_cast<std::size_t>(c)];
        K.vals[k] = ke.matrix(r, c);
      }
  });
  return K;
}

struct Constraints {
  TripletMatrix V;  ///< dof_bc x dof, one unit entry per row
  VectorXd b;       ///< prescribed values
};

inline Constraints build_constraints(const StructuralModel& m) {
  Constraints c;
  c.V.rows = m.dof_bc();
  c.V.cols = m.dof();
  const auto dofs = m.constrained_dofs();
  const auto vals = m.prescribed_values();
  c.b.resize(static_cast<Index>(dofs.size()));
  for (std::size_t r = 0; r < dofs.size(); ++r) {
    c.V.push(static_cast<Index>(r), dofs[r], 1.0);
    c.b(static_cast<Index>(r)) = vals[r];
  }
  return c;
}

inline VectorXd assemble_load(const StructuralModel& m) {
  VectorXd f = VectorXd::Zero(m.dof());
  for (const auto& l : m.loads()) {
    const Index base = m.dof_index(l.node, 0);
    for (int c = 0; c < kDofPerNode; ++c) f(base + c) += l.components[c];
  }
  return f;
}

inline AugmentedSystem assemble_augmented(const TripletMatrix& K, const TripletMatrix& V, const VectorXd& f,
                                          const VectorXd& b) {
  if (K.rows != K.cols) throw Error("assemble_augmented: K is not square");
  if (V.cols != K.cols) throw Error("assemble_augmented: V column count differs from K");
  if (f.size() != K.rows) throw Error("assemble_augmented: f length differs from K");
  if (b.size() != V.rows) throw Error("assemble_augmented: b length differs from V rows");

  AugmentedSystem s;
  s.dof = K.rows;
  s.dof_bc = V.rows;
  auto& A = s.K_aug;
  A.rows = A.cols = s.dof + s.dof_bc;
  A.row_idx.reserve(K.nnz() + 2 * V.nnz());
  A.col_idx.reserve(K.nnz() + 2 * V.nnz());
  A.vals.reserve(K.nnz() + 2 * V.nnz());
  A.row_idx = K.row_idx;
  A.col_idx = K.col_idx;
  A.vals = K.vals;
  for (std::size_t k = 0; k < V.nnz(); ++k) {
    A.push(s.dof + V.row_idx[k], V.col_idx[k], V.vals[k]);  // V
    A.push(V.col_idx[k], s.dof + V.row_idx[k], V.vals[k]);  // Vᵀ
  }
  s.f_aug.resize(s.dof + s.dof_bc);
  s.f_aug << f, b;
  return s;
}

inline AugmentedSystem assemble(const StructuralModel& m) {
  if (m.beams().empty() && m.quads().empty()) throw ModelError("model has no elements");
  const auto c = build_constraints(m);
  return assemble_augmented(assemble_stiffness(m), c.V, assemble_load(m), c.b);
}

/// Symmetry of the summed matrix, relative to its largest entry.
inline bool is_symmetric(const TripletMatrix& A, double rel_tol = 1e-12) {
  if (A.rows != A.cols) return false;
  const Eigen::SparseMatrix<double> S = A.to_sparse();
  const Eigen::SparseMatrix<double> St = S.transpose();
  double scale = 0.0;
  for (double v : A.vals) scale = std::max(scale, std::abs(v));
  const Eigen::SparseMatrix<double> D = S - St;
  double worst = 0.0;
  for (int k = 0; k < D.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(D, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
  return worst <= rel_tol * std::max(scale, 1e-300);
}

// Debug dumps ---------------------------------------------------------------

/// Matrix Market coordinate format (1-based, duplicates written as-is).
inline void write_matrix_market(std::ostream& os, const TripletMatrix& A) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << A.rows << ' ' << A.cols << ' ' << A.nnz() << '\n';
  os << std::setprecision(17);
  for (std::size_t k = 0; k < A.nnz(); ++k) os << A.row_idx[k] + 1 << ' ' << A.col_idx[k] + 1 << ' ' << A.vals[k] << '\n';
}

inline void write_vector(std::ostream& os, const VectorXd& v) {
  os << std::setprecision(17);
  for (Index i = 0; i < v.size(); ++i) os << v(i) << '\n';
}

}  // namespace sso
