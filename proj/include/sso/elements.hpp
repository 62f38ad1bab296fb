#pragma once

// Element stiffness kernels.
//
// Both kernels are templates over the scalar type so that the same code path
// yields the primal stiffness (double) and exact directional derivatives
// (ad::Dual). Local DOF order per node is (u, v, w, rx, ry, rz).

#include "sso/core.hpp"
#include "sso/dual.hpp"
#include "sso/model.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <vector>

namespace sso {

template <typename T>
using Vec3T = Eigen::Matrix<T, 3, 1>;
template <typename T>
using Mat3T = Eigen::Matrix<T, 3, 3>;
template <typename T>
using Mat12T = Eigen::Matrix<T, 12, 12>;
template <typename T>
using Mat24T = Eigen::Matrix<T, 24, 24>;

namespace detail {

template <typename T>
T norm3(const Vec3T<T>& v) {
  using std::sqrt;
  return sqrt(v(0) * v(0) + v(1) * v(1) + v(2) * v(2));
}

template <typename T>
Vec3T<T> cross3(const Vec3T<T>& a, const Vec3T<T>& b) {
  return {a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2), a(0) * b(1) - a(1) * b(0)};
}

template <typename T>
T dot3(const Vec3T<T>& a, const Vec3T<T>& b) {
  return a(0) * b(0) + a(1) * b(1) + a(2) * b(2);
}

/// Returns Tᵀ k T for T = blockdiag(R, ..., R) without forming T.
template <typename T, int N>
Eigen::Matrix<T, N, N> rotate_to_global(const Eigen::Matrix<T, N, N>& k, const Mat3T<T>& R) {
  constexpr int nb = N / 3;
  Eigen::Matrix<T, N, N> out;
  const Mat3T<T> Rt = R.transpose();
  for (int a = 0; a < nb; ++a)
    for (int b = 0; b < nb; ++b) {
      const Mat3T<T> blk = k.template block<3, 3>(3 * a, 3 * b);
      out.template block<3, 3>(3 * a, 3 * b) = Rt * blk * R;
    }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Beam-column (3D Euler-Bernoulli frame element)
// ---------------------------------------------------------------------------

template <typename T>
struct BeamProps {
  T E, G, Iy, Iz, J, A;
};

/// Rows are the local x, y, z axes in global coordinates. Local x runs from
/// node i to node j; local z is global Z orthogonalized against x, falling
/// back to global X when the member lies within 1e-6 rad of global Z.
template <typename T>
Mat3T<T> beam_local_axes(const Vec3T<T>& xi, const Vec3T<T>& xj) {
  const Vec3T<T> d = xj - xi;
  const T L = detail::norm3(d);
  const Vec3T<T> ex = d / L;
  Vec3T<T> aux(T(0), T(0), T(1));
  const Vec3T<T> c = detail::cross3(ex, aux);
  if (ad::value_of(detail::norm3(c)) < 1e-6) aux = Vec3T<T>(T(1), T(0), T(0));
  Vec3T<T> ez = aux - detail::dot3(aux, ex) * ex;
  ez /= detail::norm3(ez);
  const Vec3T<T> ey = detail::cross3(ez, ex);
  Mat3T<T> R;
  R.row(0) = ex.transpose();
  R.row(1) = ey.transpose();
  R.row(2) = ez.transpose();
  return R;
}

/// Local 12x12 stiffness. Iz governs bending in the local x-y plane, Iy in
/// the local x-z plane.
template <typename T>
Mat12T<T> beam_local_stiffness(const BeamProps<T>& p, const T& L) {
  Mat12T<T> k = Mat12T<T>::Zero();
  const T L2 = L * L, L3 = L2 * L;
  const T ea = p.E * p.A / L;
  const T gj = p.G * p.J / L;
  const T z12 = T(12) * p.E * p.Iz / L3, z6 = T(6) * p.E * p.Iz / L2;
  const T z4 = T(4) * p.E * p.Iz / L, z2 = T(2) * p.E * p.Iz / L;
  const T y12 = T(12) * p.E * p.Iy / L3, y6 = T(6) * p.E * p.Iy / L2;
  const T y4 = T(4) * p.E * p.Iy / L, y2 = T(2) * p.E * p.Iy / L;

  auto set = [&k](int r, int c, const T& v) {
    k(r, c) = v;
    k(c, r) = v;
  };
  set(0, 0, ea), set(0, 6, -ea), set(6, 6, ea);
  set(3, 3, gj), set(3, 9, -gj), set(9, 9, gj);
  // local x-y plane: v, rz
  set(1, 1, z12), set(1, 5, z6), set(1, 7, -z12), set(1, 11, z6);
  set(5, 5, z4), set(5, 7, -z6), set(5, 11, z2);
  set(7, 7, z12), set(7, 11, -z6), set(11, 11, z4);
  // local x-z plane: w, ry
  set(2, 2, y12), set(2, 4, -y6), set(2, 8, -y12), set(2, 10, -y6);
  set(4, 4, y4), set(4, 8, y6), set(4, 10, y2);
  set(8, 8, y12), set(8, 10, y6), set(10, 10, y4);
  return k;
}

template <typename T>
Mat12T<T> beam_global_stiffness(const BeamProps<T>& p, const Vec3T<T>& xi, const Vec3T<T>& xj) {
  const T L = detail::norm3(Vec3T<T>(xj - xi));
  return detail::rotate_to_global<T, 12>(beam_local_stiffness(p, L), beam_local_axes(xi, xj));
}

// ---------------------------------------------------------------------------
// Quadrilateral shell (flat MITC-4): bilinear plane-stress membrane,
// Reissner-Mindlin bending with assumed transverse shear strains tied at the
// edge midpoints, and a small drilling stiffness.
// ---------------------------------------------------------------------------

template <typename T>
struct QuadProps {
  T t, E, nu, kappa_x, kappa_y;
};

/// Drilling stiffness as a fraction of the mean bending-rotation diagonal.
inline constexpr double kDrillingFactor = 1e-6;
/// Transverse shear correction factor.
inline constexpr double kShearFactor = 5.0 / 6.0;

/// Element plane: normal from the diagonal cross product, origin at the
/// centroid, local x along the projected first edge. Corner coordinates are
/// the projections onto that plane.
template <typename T>
struct QuadFrame {
  Mat3T<T> R;  ///< rows: e1, e2, n
  std::array<T, 4> x, y;
};

template <typename T>
QuadFrame<T> quad_frame(const std::array<Vec3T<T>, 4>& X) {
  const Vec3T<T> c = (X[0] + X[1] + X[2] + X[3]) * T(0.25);
  Vec3T<T> n = detail::cross3(Vec3T<T>(X[2] - X[0]), Vec3T<T>(X[3] - X[1]));
  n /= detail::norm3(n);
  Vec3T<T> e1 = X[1] - X[0];
  e1 -= detail::dot3(e1, n) * n;
  e1 /= detail::norm3(e1);
  const Vec3T<T> e2 = detail::cross3(n, e1);
  QuadFrame<T> f;
  f.R.row(0) = e1.transpose();
  f.R.row(1) = e2.transpose();
  f.R.row(2) = n.transpose();
  for (int a = 0; a < 4; ++a) {
    const Vec3T<T> r = X[a] - c;
    f.x[a] = detail::dot3(r, e1);
    f.y[a] = detail::dot3(r, e2);
  }
  return f;
}

template <typename T>
struct QuadLocalParts {
  Mat24T<T> membrane, bending, shear, drilling;
  Mat24T<T> total() const { return membrane + bending + shear + drilling; }
};

namespace detail {

inline constexpr std::array<double, 4> kXiNode{-1.0, 1.0, 1.0, -1.0};
inline constexpr std::array<double, 4> kEtaNode{-1.0, -1.0, 1.0, 1.0};

struct ShapeEval {
  std::array<double, 4> N, dxi, deta;
};

inline ShapeEval bilinear(double xi, double eta) {
  ShapeEval s;
  for (int a = 0; a < 4; ++a) {
    s.N[a] = 0.25 * (1 + kXiNode[a] * xi) * (1 + kEtaNode[a] * eta);
    s.dxi[a] = 0.25 * kXiNode[a] * (1 + kEtaNode[a] * eta);
    s.deta[a] = 0.25 * kEtaNode[a] * (1 + kXiNode[a] * xi);
  }
  return s;
}

/// Jacobian [[x,xi  y,xi], [x,eta  y,eta]] of the planar bilinear map.
template <typename T>
Eigen::Matrix<T, 2, 2> planar_jacobian(const QuadFrame<T>& f, const ShapeEval& s) {
  Eigen::Matrix<T, 2, 2> J = Eigen::Matrix<T, 2, 2>::Zero();
  for (int a = 0; a < 4; ++a) {
    J(0, 0) += s.dxi[a] * f.x[a];
    J(0, 1) += s.dxi[a] * f.y[a];
    J(1, 0) += s.deta[a] * f.x[a];
    J(1, 1) += s.deta[a] * f.y[a];
  }
  return J;
}

/// Covariant transverse shear strains (gamma_xi, gamma_eta) at (xi, eta) as
/// rows over the 24 local DOF, using beta_x = ry, beta_y = -rx.
template <typename T>
Eigen::Matrix<T, 2, 24> covariant_shear(const QuadFrame<T>& f, double xi, double eta) {
  const ShapeEval s = bilinear(xi, eta);
  const Eigen::Matrix<T, 2, 2> J = planar_jacobian(f, s);
  Eigen::Matrix<T, 2, 24> B = Eigen::Matrix<T, 2, 24>::Zero();
  for (int a = 0; a < 4; ++a) {
    const int w = 6 * a + 2, rx = 6 * a + 3, ry = 6 * a + 4;
    B(0, w) = T(s.dxi[a]);
    B(0, ry) = s.N[a] * J(0, 0);
    B(0, rx) = -s.N[a] * J(0, 1);
    B(1, w) = T(s.deta[a]);
    B(1, ry) = s.N[a] * J(1, 0);
    B(1, rx) = -s.N[a] * J(1, 1);
  }
  return B;
}

}  // namespace detail

/// Local-frame stiffness contributions of a quad. Throws ElementError when the
/// planar Jacobian is not positive at a Gauss point.
template <typename T>
QuadLocalParts<T> quad_local_parts(const QuadProps<T>& p, const QuadFrame<T>& f, int element_id = -1) {
  using detail::bilinear;
  QuadLocalParts<T> out;
  out.membrane.setZero();
  out.bending.setZero();
  out.shear.setZero();
  out.drilling.setZero();

  const T one(1);
  const T c_m = p.E * p.t / (one - p.nu * p.nu);
  Eigen::Matrix<T, 3, 3> Dm;
  Dm << c_m, c_m * p.nu, T(0), c_m * p.nu, c_m, T(0), T(0), T(0), c_m * (one - p.nu) / T(2);

  using std::sqrt;
  const T c_b = p.E * p.t * p.t * p.t / (T(12) * (one - p.nu * p.nu));
  const T kxy = sqrt(p.kappa_x * p.kappa_y);
  Eigen::Matrix<T, 3, 3> Db;
  Db << c_b * p.kappa_x, c_b * p.nu * kxy, T(0), c_b * p.nu * kxy, c_b * p.kappa_y, T(0), T(0), T(0),
      c_b * kxy * (one - p.nu) / T(2);

  const T G = p.E / (T(2) * (one + p.nu));
  const T ds = T(kShearFactor) * G * p.t;

  // Tying points for the assumed shear field.
  const Eigen::Matrix<T, 2, 24> gA = detail::covariant_shear(f, 0.0, 1.0);   // gamma_xi at eta=+1
  const Eigen::Matrix<T, 2, 24> gC = detail::covariant_shear(f, 0.0, -1.0);  // gamma_xi at eta=-1
  const Eigen::Matrix<T, 2, 24> gD = detail::covariant_shear(f, 1.0, 0.0);   // gamma_eta at xi=+1
  const Eigen::Matrix<T, 2, 24> gB = detail::covariant_shear(f, -1.0, 0.0);  // gamma_eta at xi=-1

  const double g = 1.0 / std::sqrt(3.0);
  for (int gp = 0; gp < 4; ++gp) {
    const double xi = detail::kXiNode[gp] * g, eta = detail::kEtaNode[gp] * g;
    const auto s = bilinear(xi, eta);
    const Eigen::Matrix<T, 2, 2> J = detail::planar_jacobian(f, s);
    const T detJ = J(0, 0) * J(1, 1) - J(0, 1) * J(1, 0);
    if (!(ad::value_of(detJ) > 0.0))
      throw ElementError(element_id, "degenerate quadrilateral (non-positive Jacobian)");
    Eigen::Matrix<T, 2, 2> Ji;
    Ji << J(1, 1) / detJ, -J(0, 1) / detJ, -J(1, 0) / detJ, J(0, 0) / detJ;

    std::array<T, 4> dx, dy;
    for (int a = 0; a < 4; ++a) {
      dx[a] = Ji(0, 0) * s.dxi[a] + Ji(0, 1) * s.deta[a];
      dy[a] = Ji(1, 0) * s.dxi[a] + Ji(1, 1) * s.deta[a];
    }

    Eigen::Matrix<T, 3, 24> Bm = Eigen::Matrix<T, 3, 24>::Zero();
    Eigen::Matrix<T, 3, 24> Bb = Eigen::Matrix<T, 3, 24>::Zero();
    for (int a = 0; a < 4; ++a) {
      const int u = 6 * a, v = 6 * a + 1, rx = 6 * a + 3, ry = 6 * a + 4;
      Bm(0, u) = dx[a];
      Bm(1, v) = dy[a];
      Bm(2, u) = dy[a];
      Bm(2, v) = dx[a];
      Bb(0, ry) = dx[a];
      Bb(1, rx) = -dy[a];
      Bb(2, ry) = dy[a];
      Bb(2, rx) = -dx[a];
    }

    Eigen::Matrix<T, 2, 24> Bcov;
    Bcov.row(0) = T(0.5 * (1 + eta)) * gA.row(0) + T(0.5 * (1 - eta)) * gC.row(0);
    Bcov.row(1) = T(0.5 * (1 + xi)) * gD.row(1) + T(0.5 * (1 - xi)) * gB.row(1);
    const Eigen::Matrix<T, 2, 24> Bs = Ji * Bcov;

    out.membrane.noalias() += Bm.transpose() * (Dm * detJ) * Bm;
    out.bending.noalias() += Bb.transpose() * (Db * detJ) * Bb;
    out.shear.noalias() += Bs.transpose() * (ds * detJ) * Bs;
  }

  T rot(0);
  for (int a = 0; a < 4; ++a)
    for (int c = 3; c <= 4; ++c) rot += out.bending(6 * a + c, 6 * a + c) + out.shear(6 * a + c, 6 * a + c);
  const T kd = T(kDrillingFactor) * rot / T(8);
  for (int a = 0; a < 4; ++a) out.drilling(6 * a + 5, 6 * a + 5) = kd;
  return out;
}

template <typename T>
Mat24T<T> quad_global_stiffness(const QuadProps<T>& p, const std::array<Vec3T<T>, 4>& X, int element_id = -1) {
  const QuadFrame<T> f = quad_frame(X);
  return detail::rotate_to_global<T, 24>(quad_local_parts(p, f, element_id).total(), f.R);
}

/// Projected (flat) area of a quad: half the norm of the diagonal cross product.
inline double quad_area(const std::array<Vec3, 4>& X) {
  return 0.5 * (X[2] - X[0]).cross(X[3] - X[1]).norm();
}

/// d(quad_area)/dX_a for each corner a.
inline std::array<Vec3, 4> quad_area_gradient(const std::array<Vec3, 4>& X) {
  const Vec3 d1 = X[2] - X[0], d2 = X[3] - X[1];
  const Vec3 n = d1.cross(d2).normalized();
  const Vec3 g1 = 0.5 * d2.cross(n), g2 = 0.5 * n.cross(d1);
  return {-g1, -g2, g1, g2};
}

// ---------------------------------------------------------------------------
// Model-level element access
// ---------------------------------------------------------------------------

struct ElementStiffness {
  Eigen::MatrixXd matrix;     ///< global-frame stiffness (12x12 or 24x24)
  std::vector<Index> dofs;    ///< global DOF index of each row/column
};

/// A scalar input of one element's stiffness routine.
struct ElementParameter {
  /// ModulusScale: common factor on every elastic modulus of the element
  /// (E and G for beams), evaluated at 1.
  enum class Kind { NodeCoordinate, Thickness, YoungsModulus, ModulusScale };
  Kind kind = Kind::NodeCoordinate;
  int node = -1;  ///< node id (NodeCoordinate)
  int axis = 0;   ///< 0, 1, 2 for X, Y, Z (NodeCoordinate)
};

namespace detail {

inline std::vector<Index> element_dofs(std::span<const int> node_indices) {
  std::vector<Index> d;
  d.reserve(node_indices.size() * kDofPerNode);
  for (int n : node_indices)
    for (int c = 0; c < kDofPerNode; ++c) d.push_back(static_cast<Index>(n) * kDofPerNode + c);
  return d;
}

template <typename T>
Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> element_matrix(const StructuralModel& m, ElementRef ref,
                                                                 const ElementParameter* seed) {
  const auto nodes = m.nodes();
  auto coord = [&](int node_index, int axis) -> T {
    const Node& n = nodes[static_cast<std::size_t>(node_index)];
    const double v = axis == 0 ? n.x : (axis == 1 ? n.y : n.z);
    if constexpr (std::is_same_v<T, ad::Dual>) {
      if (seed && seed->kind == ElementParameter::Kind::NodeCoordinate && seed->node == n.id && seed->axis == axis)
        return ad::Dual(v, 1.0);
    }
    return T(v);
  };
  auto seeded = [&](double v, ElementParameter::Kind kind) -> T {
    if constexpr (std::is_same_v<T, ad::Dual>) {
      if (seed && seed->kind == kind) return ad::Dual(v, 1.0);
    }
    return T(v);
  };

  if (ref.kind == ElementKind::BeamColumn) {
    const auto& b = m.beams()[ref.index];
    const auto& ni = m.beam_node_indices(ref.index);
    Vec3T<T> xi(coord(ni[0], 0), coord(ni[0], 1), coord(ni[0], 2));
    Vec3T<T> xj(coord(ni[1], 0), coord(ni[1], 1), coord(ni[1], 2));
    BeamProps<T> p{seeded(b.E, ElementParameter::Kind::YoungsModulus), T(b.G), T(b.Iy), T(b.Iz), T(b.J), T(b.A)};
    if (!(ad::value_of(detail::norm3(Vec3T<T>(xj - xi))) > 0.0)) throw ElementError(b.id, "zero length");
    return beam_global_stiffness(p, xi, xj);
  }
  const auto& q = m.quads()[ref.index];
  const auto& ni = m.quad_node_indices(ref.index);
  std::array<Vec3T<T>, 4> X;
  for (int a = 0; a < 4; ++a) X[a] = Vec3T<T>(coord(ni[a], 0), coord(ni[a], 1), coord(ni[a], 2));
  QuadProps<T> p{seeded(q.t, ElementParameter::Kind::Thickness), seeded(q.E, ElementParameter::Kind::YoungsModulus),
                 T(q.nu), T(q.kappa_x), T(q.kappa_y)};
  return quad_global_stiffness(p, X, q.id);
}

}  // namespace detail

inline std::vector<Index> element_dof_indices(const StructuralModel& m, ElementRef ref) {
  if (ref.kind == ElementKind::BeamColumn) return detail::element_dofs(m.beam_node_indices(ref.index));
  return detail::element_dofs(m.quad_node_indices(ref.index));
}

/// Node ids attached to an element.
inline std::vector<int> element_node_ids(const StructuralModel& m, ElementRef ref) {
  if (ref.kind == ElementKind::BeamColumn) {
    const auto& b = m.beams()[ref.index];
    return {b.i_node, b.j_node};
  }
  const auto& q = m.quads()[ref.index];
  return {q.nodes.begin(), q.nodes.end()};
}

inline int element_id(const StructuralModel& m, ElementRef ref) {
  return ref.kind == ElementKind::BeamColumn ? m.beams()[ref.index].id : m.quads()[ref.index].id;
}

inline ElementStiffness element_stiffness(const StructuralModel& m, ElementRef ref) {
  return {detail::element_matrix<double>(m, ref, nullptr), element_dof_indices(m, ref)};
}

/// Exact derivative of the element's global stiffness with respect to one
/// scalar input. Zero when the parameter does not enter this element.
inline Eigen::MatrixXd element_jacobian(const StructuralModel& m, ElementRef ref, const ElementParameter& param) {
  const Index n = ref.kind == ElementKind::BeamColumn ? 12 : 24;
  switch (param.kind) {
    case ElementParameter::Kind::NodeCoordinate: {
      const auto ids = element_node_ids(m, ref);
      if (std::find(ids.begin(), ids.end(), param.node) == ids.end()) return Eigen::MatrixXd::Zero(n, n);
      break;
    }
    case ElementParameter::Kind::Thickness:
      if (ref.kind != ElementKind::QuadShell) return Eigen::MatrixXd::Zero(n, n);
      break;
    case ElementParameter::Kind::YoungsModulus:
      // Quad stiffness is linear in E; beam torsion depends on G only.
      if (ref.kind == ElementKind::QuadShell) return detail::element_matrix<double>(m, ref, nullptr) / m.quads()[ref.index].E;
      break;
    case ElementParameter::Kind::ModulusScale:
      return detail::element_matrix<double>(m, ref, nullptr);
  }
  const auto K = detail::element_matrix<ad::Dual>(m, ref, &param);
  return K.unaryExpr([](const ad::Dual& x) { return x.d; });
}

}  // namespace sso
