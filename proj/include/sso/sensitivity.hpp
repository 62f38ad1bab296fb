#pragma once

// Objective evaluation and adjoint gradients with respect to design
// parameters, plus a central finite-difference oracle.
//
//   K_augᵀ λ = [∂g/∂u; 0]
//   dg/dp   = ∂g/∂p − λᵀ (∂K/∂p u − ∂f/∂p)

#include "sso/assembly.hpp"
#include "sso/core.hpp"
#include "sso/elements.hpp"
#include "sso/linsolve.hpp"
#include "sso/model.hpp"
#include "sso/simp.hpp"

#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace sso {

enum class ParameterKind { NodeCoord, ShellThickness, DensityRatio };

/// One scalar design variable. `entity` is a node id (NodeCoord) or an
/// element id; `axis` is 0/1/2 for X/Y/Z.
struct DesignParameter {
  ParameterKind kind = ParameterKind::NodeCoord;
  int entity = 0;
  int axis = 0;
  double value = 0.0;

  static DesignParameter node_coord(int node, int axis, double value = 0.0) {
    return {ParameterKind::NodeCoord, node, axis, value};
  }
  static DesignParameter thickness(int element, double value = 0.0) {
    return {ParameterKind::ShellThickness, element, 0, value};
  }
  static DesignParameter density(int element, double value = 1.0) {
    return {ParameterKind::DensityRatio, element, 0, value};
  }

  std::string label() const {
    switch (kind) {
      case ParameterKind::NodeCoord:
        return "node:" + std::to_string(entity) + ":" + "XYZ"[axis];
      case ParameterKind::ShellThickness:
        return "thickness:" + std::to_string(entity);
      case ParameterKind::DensityRatio:
        return "density:" + std::to_string(entity);
    }
    return "?";
  }
};

/// Base model plus an ordered list of design parameters. `realize` maps a
/// parameter vector onto a concrete model; density parameters scale the base
/// element moduli (E, and G for beams) by p^P.
class ParameterSet {
 public:
  ParameterSet() = default;

  ParameterSet(StructuralModel base, std::vector<DesignParameter> params, SimpConfig simp = {})
      : base_(std::move(base)), params_(std::move(params)), simp_(simp) {
    std::set<std::tuple<int, int, int>> seen;
    bool any_density = false;
    for (std::size_t k = 0; k < params_.size(); ++k) {
      const auto& p = params_[k];
      const std::string who = "parameter " + std::to_string(k) + " (" + p.label() + ")";
      if (!seen.emplace(static_cast<int>(p.kind), p.entity, p.axis).second) throw ModelError(who + ": duplicate");
      if (!std::isfinite(p.value)) throw ModelError(who + ": non-finite value");
      switch (p.kind) {
        case ParameterKind::NodeCoord:
          if (!base_.has_node(p.entity)) throw ModelError(who + ": unknown node");
          if (p.axis < 0 || p.axis > 2) throw ModelError(who + ": axis must be 0, 1 or 2");
          break;
        case ParameterKind::ShellThickness: {
          auto ref = base_.find_element(p.entity);
          if (!ref) throw ModelError(who + ": unknown element");
          if (ref->kind != ElementKind::QuadShell) throw ModelError(who + ": element is not a quad shell");
          if (!(p.value > 0.0)) throw ModelError(who + ": thickness must be positive");
          break;
        }
        case ParameterKind::DensityRatio:
          if (!base_.find_element(p.entity)) throw ModelError(who + ": unknown element");
          any_density = true;
          if (!(p.value >= simp_.p_min && p.value <= 1.0)) throw ModelError(who + ": density outside [p_min, 1]");
          break;
      }
    }
    if (any_density) simp_.validate();

    // Node id -> attached elements, for coordinate parameters.
    for (std::size_t b = 0; b < base_.beams().size(); ++b)
      for (int n : {base_.beams()[b].i_node, base_.beams()[b].j_node})
        attached_[n].push_back({ElementKind::BeamColumn, b});
    for (std::size_t q = 0; q < base_.quads().size(); ++q)
      for (int n : base_.quads()[q].nodes) attached_[n].push_back({ElementKind::QuadShell, q});
  }

  std::size_t size() const { return params_.size(); }
  const StructuralModel& base() const { return base_; }
  const std::vector<DesignParameter>& params() const { return params_; }
  const SimpConfig& simp() const { return simp_; }

  VectorXd values() const {
    VectorXd v(static_cast<Index>(params_.size()));
    for (std::size_t k = 0; k < params_.size(); ++k) v(static_cast<Index>(k)) = params_[k].value;
    return v;
  }

  /// Base modulus of an element (the SIMP reference).
  double reference_modulus(ElementRef ref) const {
    return ref.kind == ElementKind::BeamColumn ? base_.beams()[ref.index].E : base_.quads()[ref.index].E;
  }

  const std::vector<ElementRef>& elements_at(int node) const {
    static const std::vector<ElementRef> none;
    auto it = attached_.find(node);
    return it == attached_.end() ? none : it->second;
  }

  StructuralModel realize(const VectorXd& values) const {
    if (values.size() != static_cast<Index>(params_.size()))
      throw Error("parameter vector has length " + std::to_string(values.size()) + ", expected " +
                  std::to_string(params_.size()));
    if (!values.allFinite()) throw NumericalError("non-finite design parameter");
    return base_.with_edits([&](StructuralModel::Data& d) {
      for (std::size_t k = 0; k < params_.size(); ++k) {
        const auto& p = params_[k];
        const double v = values(static_cast<Index>(k));
        switch (p.kind) {
          case ParameterKind::NodeCoord: {
            Node& n = d.nodes[static_cast<std::size_t>(base_.node_index(p.entity))];
            (p.axis == 0 ? n.x : (p.axis == 1 ? n.y : n.z)) = v;
            break;
          }
          case ParameterKind::ShellThickness:
            d.quads[d.elements.at(p.entity).index].t = v;
            break;
          case ParameterKind::DensityRatio: {
            const ElementRef ref = d.elements.at(p.entity);
            const double E = simp_modulus_raw(v, reference_modulus(ref), simp_.P);
            if (ref.kind == ElementKind::BeamColumn) {
              d.beams[ref.index].E = E;
              d.beams[ref.index].G = simp_modulus_raw(v, base_.beams()[ref.index].G, simp_.P);
            } else {
              d.quads[ref.index].E = E;
            }
            break;
          }
        }
      }
    });
  }

 private:
  StructuralModel base_;
  std::vector<DesignParameter> params_;
  SimpConfig simp_;
  std::map<int, std::vector<ElementRef>> attached_;
};

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

struct ObjectiveContext {
  const StructuralModel& model;  ///< realized model
  const ParameterSet& params;
  const VectorXd& p;  ///< parameter values
  const VectorXd& f;  ///< load vector (length dof)
  const VectorXd& u;  ///< displacements (length dof)
};

struct ObjectiveEval {
  double value = 0.0;
  VectorXd dg_du;  ///< length dof
  VectorXd dg_dp;  ///< explicit partial, length = parameter count; empty means zero
};

using Objective = std::function<ObjectiveEval(const ObjectiveContext&)>;

/// ∂f/∂p for parameter k; empty means zero.
using LoadDerivative = std::function<VectorXd(const ObjectiveContext&, std::size_t k)>;

inline double strain_energy(const VectorXd& f, const VectorXd& u) {
  if (f.size() != u.size()) throw Error("strain_energy: length mismatch");
  return 0.5 * f.dot(u);
}

/// g = 0.5 fᵀu.
inline Objective strain_energy_objective() {
  return [](const ObjectiveContext& c) {
    return ObjectiveEval{strain_energy(c.f, c.u), 0.5 * c.f, {}};
  };
}

// ---------------------------------------------------------------------------
// Adjoint sensitivity
// ---------------------------------------------------------------------------

struct SensitivityResult {
  double value = 0.0;
  VectorXd gradient;  ///< aligned with ParameterSet::params()
  VectorXd adjoint;   ///< λ over the augmented system
  VectorXd u;
  VectorXd f;
  ObjectiveEval objective;
  Solution solution;
};

/// Solves K_augᵀ λ = [dg_du; 0] with an existing factorization.
inline VectorXd adjoint_solve(const Factorization& fac, const VectorXd& dg_du, Index dof_bc) {
  if (dg_du.size() + dof_bc != fac.size())
    throw Error("adjoint_solve: dg/du length " + std::to_string(dg_du.size()) + " does not match the system");
  VectorXd rhs = VectorXd::Zero(fac.size());
  rhs.head(dg_du.size()) = dg_du;
  if (rhs.isZero(0.0)) return rhs;
  return fac.solve_transpose(rhs);
}

namespace detail {

inline double element_contribution(const StructuralModel& m, ElementRef ref, const ElementParameter& ep,
                                   const VectorXd& lambda, const VectorXd& u, double scale) {
  const Eigen::MatrixXd J = element_jacobian(m, ref, ep);
  const auto dofs = element_dof_indices(m, ref);
  VectorXd le(static_cast<Index>(dofs.size())), ue(static_cast<Index>(dofs.size()));
  for (std::size_t i = 0; i < dofs.size(); ++i) {
    le(static_cast<Index>(i)) = lambda(dofs[i]);
    ue(static_cast<Index>(i)) = u(dofs[i]);
  }
  return scale * le.dot(J * ue);
}

/// λᵀ (∂K/∂p_k) u, summed over the elements parameter k touches.
inline double dK_term(const ParameterSet& ps, const StructuralModel& m, std::size_t k, double pk,
                      const VectorXd& lambda, const VectorXd& u) {
  const auto& p = ps.params()[k];
  switch (p.kind) {
    case ParameterKind::NodeCoord: {
      double s = 0.0;
      const ElementParameter ep{ElementParameter::Kind::NodeCoordinate, p.entity, p.axis};
      for (const auto& ref : ps.elements_at(p.entity)) s += element_contribution(m, ref, ep, lambda, u, 1.0);
      return s;
    }
    case ParameterKind::ShellThickness: {
      const ElementRef ref = *m.find_element(p.entity);
      return element_contribution(m, ref, {ElementParameter::Kind::Thickness}, lambda, u, 1.0);
    }
    case ParameterKind::DensityRatio: {
      // k_e is homogeneous of degree one in the moduli, so ∂k_e/∂p = (E'/E) k_e.
      const ElementRef ref = *m.find_element(p.entity);
      const double E_ref = ps.reference_modulus(ref);
      const double rate = simp_modulus_derivative(pk, E_ref, ps.simp().P) / simp_modulus_raw(pk, E_ref, ps.simp().P);
      return element_contribution(m, ref, {ElementParameter::Kind::ModulusScale}, lambda, u, rate);
    }
  }
  return 0.0;
}

}  // namespace detail

/// Objective value and adjoint gradient at `p`. One factorization, one
/// primal solve and one adjoint solve regardless of the parameter count.
inline SensitivityResult sensitivity(const ParameterSet& ps, const VectorXd& p, const Objective& g,
                                     const SolverChoice& choice = {}, const LoadDerivative& df_dp = {}) {
  const StructuralModel m = ps.realize(p);
  const AugmentedSystem sys = assemble(m);
  const Factorization fac(sys, choice, &m);

  SensitivityResult r;
  r.solution = solve_with(fac, sys);
  r.u = r.solution.u;
  r.f = sys.f_aug.head(sys.dof);
  const ObjectiveContext ctx{m, ps, p, r.f, r.u};
  r.objective = g(ctx);
  r.value = r.objective.value;
  if (r.objective.dg_du.size() != sys.dof) throw Error("objective returned dg/du of wrong length");
  if (r.objective.dg_dp.size() != 0 && r.objective.dg_dp.size() != p.size())
    throw Error("objective returned dg/dp of wrong length");

  r.adjoint = adjoint_solve(fac, r.objective.dg_du, sys.dof_bc);
  const VectorXd lambda = r.adjoint.head(sys.dof);

  r.gradient = VectorXd::Zero(p.size());
  parallel_for(ps.size(), [&](std::size_t k) {
    const auto K = static_cast<Index>(k);
    double gk = r.objective.dg_dp.size() ? r.objective.dg_dp(K) : 0.0;
    gk -= detail::dK_term(ps, m, k, p(K), lambda, r.u);
    if (df_dp) {
      const VectorXd dfk = df_dp(ctx, k);
      if (dfk.size() == sys.dof) gk += lambda.dot(dfk);
    }
    r.gradient(K) = gk;
  });
  if (!r.gradient.allFinite()) throw NumericalError("non-finite sensitivity");
  return r;
}

/// Objective value only (one solve).
inline double evaluate_objective(const ParameterSet& ps, const VectorXd& p, const Objective& g,
                                 const SolverChoice& choice = {}) {
  const StructuralModel m = ps.realize(p);
  const AugmentedSystem sys = assemble(m);
  const Solution s = solve(sys, choice, &m);
  const VectorXd f = sys.f_aug.head(sys.dof);
  return g(ObjectiveContext{m, ps, p, f, s.u}).value;
}

inline constexpr double kDefaultFdStep = 1e-6;

/// Central differences with step h_k = rel_step * (1 + |p_k|). Order 4 uses
/// the five-point stencil, which tolerates larger steps and so suffers less
/// cancellation on small gradient entries.
inline VectorXd fd_gradient(const ParameterSet& ps, const VectorXd& p, const Objective& g,
                            double rel_step = kDefaultFdStep, const SolverChoice& choice = {}, int order = 2) {
  if (order != 2 && order != 4) throw Error("finite differences: order must be 2 or 4");
  auto at = [&](Index k, double d) {
    VectorXd q = p;
    q(k) += d;
    return evaluate_objective(ps, q, g, choice);
  };
  VectorXd grad(p.size());
  for (Index k = 0; k < p.size(); ++k) {
    const double h = rel_step * (1.0 + std::abs(p(k)));
    const double c1 = (at(k, h) - at(k, -h)) / (2.0 * h);
    grad(k) = order == 2 ? c1 : (4.0 * c1 - (at(k, 2 * h) - at(k, -2 * h)) / (4.0 * h)) / 3.0;
  }
  return grad;
}

}  // namespace sso
