#pragma once

// Filters, design-variable maps, objectives and optimizers for shape, size
// and density optimization, and the driver loop tying them to the adjoint.

#include "sso/core.hpp"
#include "sso/elements.hpp"
#include "sso/linsolve.hpp"
#include "sso/model.hpp"
#include "sso/sensitivity.hpp"
#include "sso/simp.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sso {

// ---------------------------------------------------------------------------
// Hat filter
// ---------------------------------------------------------------------------

/// Linear-cone smoothing over a point cloud: w_ij ∝ max(0, r − d_ij), rows
/// normalized to one.
class HatFilter {
 public:
  using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  HatFilter() = default;

  HatFilter(const Eigen::MatrixX3d& positions, double radius) : radius_(radius) {
    if (!(radius >= 0.0) || !std::isfinite(radius)) throw Error("hat filter: radius must be finite and >= 0");
    const Index n = positions.rows();
    std::vector<Eigen::Triplet<double>> t;
    for (Index i = 0; i < n; ++i) {
      std::vector<std::pair<Index, double>> row;
      double sum = 0.0;
      for (Index j = 0; j < n; ++j) {
        const double w = std::max(0.0, radius - (positions.row(i) - positions.row(j)).norm());
        if (w > 0.0) {
          row.emplace_back(j, w);
          sum += w;
        }
      }
      if (sum == 0.0) {  // radius 0: keep own value
        t.emplace_back(i, i, 1.0);
        continue;
      }
      for (auto [j, w] : row) t.emplace_back(i, j, w / sum);
    }
    W_.resize(n, n);
    W_.setFromTriplets(t.begin(), t.end());
  }

  Index size() const { return W_.rows(); }
  double radius() const { return radius_; }
  const RowMatrix& weights() const { return W_; }

  VectorXd apply(const VectorXd& v) const {
    check(v);
    return W_ * v;
  }
  VectorXd apply_transpose(const VectorXd& v) const {
    check(v);
    return W_.transpose() * v;
  }

 private:
  void check(const VectorXd& v) const {
    if (v.size() != W_.cols())
      throw Error("hat filter: field length " + std::to_string(v.size()) + " != " + std::to_string(W_.cols()));
  }
  double radius_ = 0.0;
  RowMatrix W_;
};

/// Coordinates of the given nodes, one row each.
inline Eigen::MatrixX3d node_positions(const StructuralModel& m, const std::vector<int>& ids) {
  Eigen::MatrixX3d X(static_cast<Index>(ids.size()), 3);
  for (std::size_t i = 0; i < ids.size(); ++i) X.row(static_cast<Index>(i)) = m.node(ids[i]).position().transpose();
  return X;
}

/// Centroids (mean of node positions) of the given elements.
inline Eigen::MatrixX3d element_centroids(const StructuralModel& m, const std::vector<int>& ids) {
  Eigen::MatrixX3d X(static_cast<Index>(ids.size()), 3);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto ref = m.find_element(ids[i]);
    if (!ref) throw ModelError("unknown element " + std::to_string(ids[i]));
    Vec3 c = Vec3::Zero();
    const auto nodes = element_node_ids(m, *ref);
    for (int n : nodes) c += m.node(n).position();
    X.row(static_cast<Index>(i)) = (c / static_cast<double>(nodes.size())).transpose();
  }
  return X;
}

// ---------------------------------------------------------------------------
// Shape normalization
// ---------------------------------------------------------------------------

struct ShapeBox {
  double z_min = 0.0, z_max = 1.0;

  void validate() const {
    if (!(z_max > z_min) || !std::isfinite(z_min) || !std::isfinite(z_max))
      throw Error("shape box: z_max must exceed z_min");
  }
  double span() const { return z_max - z_min; }
};

inline VectorXd shape_denormalize(const VectorXd& p_s, const ShapeBox& box) {
  box.validate();
  return (box.z_min + box.span() * p_s.array()).matrix();
}

inline VectorXd shape_normalize(const VectorXd& z, const ShapeBox& box) {
  box.validate();
  return ((z.array() - box.z_min) / box.span()).matrix();
}

// ---------------------------------------------------------------------------
// Penalized volume objective for thickness (size) optimization
// ---------------------------------------------------------------------------

struct SizeObjectiveConfig {
  double eps1 = 1.0;    ///< adaptive penalty coefficient
  double kappa = 1.015; ///< multiplicative learning parameter for eps1
  double t_min = 0.1;
  double u_max = 0.01;
  int component = 2;    ///< monitored displacement component (UZ)

  void validate() const {
    if (!(kappa > 1.0)) throw Error("size objective: kappa must exceed 1");
    if (!(t_min > 0.0)) throw Error("size objective: t_min must be positive");
    if (!(u_max > 0.0)) throw Error("size objective: u_max must be positive");
    if (!(eps1 > 0.0)) throw Error("size objective: eps1 must be positive");
    if (component < 0 || component >= kDofPerNode) throw Error("size objective: component out of range");
  }
};

struct SizeObjectiveTerms {
  double g = 0.0;
  double c = 0.0;  ///< displacement violation
  double W = 0.0;  ///< penalized volume
  double next_eps1 = 0.0;
  VectorXd dg_du;
  VectorXd dg_dp;
};

/// g = (1 + ε₁ c) W with c = Σ max(0, |u_j|/u_max − 1) over monitored DOF
/// and W = Σ A_i p_i + Σ max(0, (t_min − p_i)/t_min). `areas[i]` pairs with
/// p(i); entries with area 0 are not thicknesses and do not enter W.
inline SizeObjectiveTerms size_objective(const VectorXd& p, const VectorXd& u, const VectorXd& areas,
                                         const SizeObjectiveConfig& cfg) {
  cfg.validate();
  if (areas.size() != p.size()) throw Error("size objective: area list does not match parameters");
  SizeObjectiveTerms r;
  r.dg_du = VectorXd::Zero(u.size());
  VectorXd dc_du = VectorXd::Zero(u.size());
  for (Index j = cfg.component; j < u.size(); j += kDofPerNode) {
    const double ratio = std::abs(u(j)) / cfg.u_max;
    if (ratio > 1.0) {
      r.c += ratio - 1.0;
      dc_du(j) = (u(j) > 0.0 ? 1.0 : -1.0) / cfg.u_max;
    }
  }
  VectorXd dW = VectorXd::Zero(p.size());
  for (Index i = 0; i < p.size(); ++i) {
    if (areas(i) == 0.0) continue;
    r.W += areas(i) * p(i);
    dW(i) = areas(i);
    if (p(i) < cfg.t_min) {
      r.W += (cfg.t_min - p(i)) / cfg.t_min;
      dW(i) -= 1.0 / cfg.t_min;
    }
  }
  r.g = (1.0 + cfg.eps1 * r.c) * r.W;
  r.dg_du = cfg.eps1 * r.W * dc_du;
  r.dg_dp = (1.0 + cfg.eps1 * r.c) * dW;
  r.next_eps1 = r.c == 0.0 ? cfg.eps1 / cfg.kappa : cfg.eps1 * cfg.kappa;
  return r;
}

/// Stateful wrapper: evaluates the size objective and carries ε₁ between
/// iterations (`advance` applies the update computed at the last evaluation).
class SizeObjective {
 public:
  explicit SizeObjective(SizeObjectiveConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  Objective objective() {
    return [this](const ObjectiveContext& c) {
      VectorXd areas = VectorXd::Zero(c.p.size());
      std::map<std::pair<int, int>, Index> coord_param;
      for (std::size_t k = 0; k < c.params.size(); ++k) {
        const auto& dp = c.params.params()[k];
        if (dp.kind == ParameterKind::NodeCoord) coord_param[{dp.entity, dp.axis}] = static_cast<Index>(k);
      }
      std::vector<std::pair<Index, std::array<Vec3, 4>>> area_grads;
      for (std::size_t k = 0; k < c.params.size(); ++k) {
        const auto& dp = c.params.params()[k];
        if (dp.kind != ParameterKind::ShellThickness) continue;
        const ElementRef ref = *c.model.find_element(dp.entity);
        const auto& ni = c.model.quad_node_indices(ref.index);
        std::array<Vec3, 4> X;
        for (int a = 0; a < 4; ++a) X[a] = c.model.nodes()[static_cast<std::size_t>(ni[a])].position();
        areas(static_cast<Index>(k)) = quad_area(X);
        if (!coord_param.empty()) area_grads.emplace_back(static_cast<Index>(k), quad_area_gradient(X));
      }
      last_ = size_objective(c.p, c.u, areas, cfg_);
      // Element areas move with the nodes: dW/dx = Σ t_k dA_k/dx.
      const double penalty = 1.0 + cfg_.eps1 * last_.c;
      for (const auto& [k, grad] : area_grads) {
        const auto& dp = c.params.params()[static_cast<std::size_t>(k)];
        const ElementRef ref = *c.model.find_element(dp.entity);
        const auto& ni = c.model.quad_node_indices(ref.index);
        for (int a = 0; a < 4; ++a) {
          const int node = c.model.nodes()[static_cast<std::size_t>(ni[a])].id;
          for (int axis = 0; axis < 3; ++axis) {
            auto it = coord_param.find({node, axis});
            if (it != coord_param.end()) last_.dg_dp(it->second) += penalty * c.p(k) * grad[a](axis);
          }
        }
      }
      return ObjectiveEval{last_.g, last_.dg_du, last_.dg_dp};
    };
  }

  void advance() { cfg_.eps1 = last_.next_eps1; }
  const SizeObjectiveTerms& last() const { return last_; }
  const SizeObjectiveConfig& config() const { return cfg_; }

 private:
  SizeObjectiveConfig cfg_;
  SizeObjectiveTerms last_;
};

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

inline VectorXd clamp(const VectorXd& x, const VectorXd& lb, const VectorXd& ub) {
  return x.cwiseMax(lb).cwiseMin(ub);
}

/// p' = clamp(p − step·grad).
inline VectorXd gd_step(const VectorXd& p, const VectorXd& grad, double step, const VectorXd* lb = nullptr,
                        const VectorXd* ub = nullptr) {
  if (!(step > 0.0)) throw Error("gradient descent: step must be positive");
  VectorXd x = p - step * grad;
  if (lb) x = x.cwiseMax(*lb);
  if (ub) x = x.cwiseMin(*ub);
  return x;
}

struct AdamState {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  VectorXd m, v;
  long t = 0;
};

/// Bias-corrected Adam update; moments are sized on first use.
inline VectorXd adam_step(AdamState& s, const VectorXd& p, const VectorXd& grad) {
  if (!(s.lr >= 0.0)) throw Error("adam: learning rate must be >= 0");
  if (s.m.size() != p.size()) {
    s.m = VectorXd::Zero(p.size());
    s.v = VectorXd::Zero(p.size());
    s.t = 0;
  }
  ++s.t;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grad;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  VectorXd x = p;
  for (Index i = 0; i < p.size(); ++i) {
    const double mh = s.m(i) / bc1;
    const double vh = s.v(i) / bc2;
    x(i) -= s.lr * mh / (std::sqrt(vh) + s.eps);
  }
  return x;
}

struct MmaConfig {
  double asy_init = 0.5;
  double asy_incr = 1.2;
  double asy_decr = 0.7;
  double asy_min = 1e-5;  ///< closest asymptote distance, fraction of (ub − lb)
  double asy_max = 10.0;  ///< farthest asymptote distance, fraction of (ub − lb)
  double move = 0.5;     ///< move limit as a fraction of (ub − lb)
  double albefa = 0.1;
  double raa0 = 1e-5;
  double c_art = 1000.0; ///< cost of the artificial constraint-relaxation variables
  int dual_max_iter = 200;
  double dual_tol = 1e-12;
};

struct MmaState {
  MmaConfig cfg;
  VectorXd xold1, xold2, low, upp;
  long iter = 0;
  double kkt_residual = 0.0;  ///< subproblem residual at the last returned point
  VectorXd lambda;            ///< subproblem multipliers
};

/// One MMA iteration: min f0 s.t. f_i ≤ 0, lb ≤ x ≤ ub. `g` holds the m
/// constraint values and `dg` their gradients (m × n).
inline VectorXd mma_step(MmaState& s, const VectorXd& x, const VectorXd& df0, const VectorXd& g,
                         const Eigen::MatrixXd& dg, const VectorXd& lb, const VectorXd& ub) {
  const Index n = x.size();
  const Index m = g.size();
  if (df0.size() != n || lb.size() != n || ub.size() != n || dg.rows() != m || (m > 0 && dg.cols() != n))
    throw Error("mma: inconsistent dimensions");
  for (Index j = 0; j < n; ++j)
    if (!(ub(j) > lb(j))) throw Error("mma: infeasible bounds at variable " + std::to_string(j));
  const MmaConfig& c = s.cfg;
  const VectorXd range = ub - lb;
  ++s.iter;

  // Asymptotes.
  if (s.iter <= 2 || s.low.size() != n) {
    s.low = x - c.asy_init * range;
    s.upp = x + c.asy_init * range;
  } else {
    for (Index j = 0; j < n; ++j) {
      const double z = (x(j) - s.xold1(j)) * (s.xold1(j) - s.xold2(j));
      const double f = z > 0.0 ? c.asy_incr : (z < 0.0 ? c.asy_decr : 1.0);
      double lo = x(j) - f * (s.xold1(j) - s.low(j));
      double up = x(j) + f * (s.upp(j) - s.xold1(j));
      lo = std::clamp(lo, x(j) - c.asy_max * range(j), x(j) - c.asy_min * range(j));
      up = std::clamp(up, x(j) + c.asy_min * range(j), x(j) + c.asy_max * range(j));
      s.low(j) = lo;
      s.upp(j) = up;
    }
  }

  // Subproblem bounds and approximation coefficients.
  VectorXd alpha(n), beta(n), p0(n), q0(n);
  Eigen::MatrixXd P(m, n), Q(m, n);
  VectorXd b(m);
  for (Index j = 0; j < n; ++j) {
    alpha(j) = std::max({lb(j), s.low(j) + c.albefa * (x(j) - s.low(j)), x(j) - c.move * range(j)});
    beta(j) = std::min({ub(j), s.upp(j) - c.albefa * (s.upp(j) - x(j)), x(j) + c.move * range(j)});
    const double ux2 = std::pow(s.upp(j) - x(j), 2), xl2 = std::pow(x(j) - s.low(j), 2);
    const double reg = c.raa0 / range(j);
    const double dp = std::max(df0(j), 0.0), dm = std::max(-df0(j), 0.0);
    p0(j) = ux2 * (1.001 * dp + 0.001 * dm + reg);
    q0(j) = xl2 * (0.001 * dp + 1.001 * dm + reg);
    for (Index i = 0; i < m; ++i) {
      const double ap = std::max(dg(i, j), 0.0), am = std::max(-dg(i, j), 0.0);
      P(i, j) = ux2 * (1.001 * ap + 0.001 * am + reg);
      Q(i, j) = xl2 * (0.001 * ap + 1.001 * am + reg);
    }
  }
  for (Index i = 0; i < m; ++i) {
    double sum = 0.0;
    for (Index j = 0; j < n; ++j) sum += P(i, j) / (s.upp(j) - x(j)) + Q(i, j) / (x(j) - s.low(j));
    b(i) = sum - g(i);
  }

  auto primal = [&](const VectorXd& lam) {
    VectorXd xs(n);
    for (Index j = 0; j < n; ++j) {
      const double Pj = p0(j) + (m ? lam.dot(P.col(j)) : 0.0);
      const double Qj = q0(j) + (m ? lam.dot(Q.col(j)) : 0.0);
      const double sp = std::sqrt(Pj), sq = std::sqrt(Qj);
      const double xj = (sp * s.low(j) + sq * s.upp(j)) / (sp + sq);
      xs(j) = std::clamp(xj, alpha(j), beta(j));
    }
    return xs;
  };
  auto approx = [&](const VectorXd& xs, Index i) {
    double v = -b(i);
    for (Index j = 0; j < n; ++j) v += P(i, j) / (s.upp(j) - xs(j)) + Q(i, j) / (xs(j) - s.low(j));
    return v;
  };
  auto yvec = [&](const VectorXd& lam) { return (lam.array() - c.c_art).max(0.0).matrix(); };
  auto dual_value = [&](const VectorXd& lam) {
    const VectorXd xs = primal(lam);
    const VectorXd y = yvec(lam);
    double w = 0.0;
    for (Index j = 0; j < n; ++j) w += p0(j) / (s.upp(j) - xs(j)) + q0(j) / (xs(j) - s.low(j));
    for (Index i = 0; i < m; ++i) w += c.c_art * y(i) + 0.5 * y(i) * y(i) + lam(i) * (approx(xs, i) - y(i));
    return w;
  };
  auto dual_grad = [&](const VectorXd& lam) {
    const VectorXd xs = primal(lam);
    const VectorXd y = yvec(lam);
    VectorXd gr(m);
    for (Index i = 0; i < m; ++i) gr(i) = approx(xs, i) - y(i);
    return gr;
  };
  auto projected_residual = [&](const VectorXd& lam, const VectorXd& gr) {
    double r = 0.0;
    for (Index i = 0; i < m; ++i) r = std::max(r, std::abs(lam(i) > 0.0 ? gr(i) : std::max(gr(i), 0.0)));
    return r;
  };

  // Dual maximization over λ ≥ 0: projected Newton with backtracking.
  VectorXd lam = (s.lambda.size() == m) ? s.lambda : VectorXd::Ones(m);
  if (m > 0) {
    for (int it = 0; it < c.dual_max_iter; ++it) {
      const VectorXd xs = primal(lam);
      const VectorXd gr = dual_grad(lam);
      if (projected_residual(lam, gr) <= c.dual_tol * std::max(1.0, b.cwiseAbs().maxCoeff())) break;
      // Hessian of the dual (negative semidefinite).
      Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m, m);
      for (Index j = 0; j < n; ++j) {
        if (xs(j) <= alpha(j) || xs(j) >= beta(j)) continue;
        const double ux = s.upp(j) - xs(j), xl = xs(j) - s.low(j);
        const double Pj = p0(j) + lam.dot(P.col(j)), Qj = q0(j) + lam.dot(Q.col(j));
        const double d2 = 2.0 * Pj / (ux * ux * ux) + 2.0 * Qj / (xl * xl * xl);
        VectorXd a(m);
        for (Index i = 0; i < m; ++i) a(i) = P(i, j) / (ux * ux) - Q(i, j) / (xl * xl);
        H -= a * a.transpose() / d2;
      }
      for (Index i = 0; i < m; ++i) {
        if (lam(i) > c.c_art) H(i, i) -= 1.0;
        H(i, i) -= 1e-12 * std::max(1.0, std::abs(H(i, i)));
      }
      // Free set: variables not held at the bound by an outward gradient.
      VectorXd dir = VectorXd::Zero(m);
      std::vector<Index> free;
      for (Index i = 0; i < m; ++i)
        if (lam(i) > 0.0 || gr(i) > 0.0) free.push_back(i);
      if (free.empty()) break;
      Eigen::MatrixXd Hf(free.size(), free.size());
      VectorXd gf(free.size());
      for (std::size_t a = 0; a < free.size(); ++a) {
        gf(static_cast<Index>(a)) = gr(free[a]);
        for (std::size_t bb = 0; bb < free.size(); ++bb)
          Hf(static_cast<Index>(a), static_cast<Index>(bb)) = H(free[a], free[bb]);
      }
      VectorXd df = (-Hf).ldlt().solve(gf);
      if (!df.allFinite() || df.dot(gf) <= 0.0) df = gf;  // ascent fallback
      for (std::size_t a = 0; a < free.size(); ++a) dir(free[a]) = df(static_cast<Index>(a));

      const double w0 = dual_value(lam);
      double t = 1.0;
      VectorXd trial = lam;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
        trial = (lam + t * dir).cwiseMax(0.0);
        if (dual_value(trial) >= w0 - 1e-14 * std::abs(w0)) {
          moved = true;
          break;
        }
      }
      if (!moved || (trial - lam).norm() <= 1e-300) {
        lam = trial;
        break;
      }
      lam = trial;
    }
  }
  const VectorXd xnew = primal(lam);
  s.kkt_residual = m > 0 ? projected_residual(lam, dual_grad(lam)) : 0.0;
  s.lambda = lam;
  s.xold2 = s.xold1.size() == n ? s.xold1 : x;
  s.xold1 = x;
  return xnew;
}

// ---------------------------------------------------------------------------
// Optimization driver
// ---------------------------------------------------------------------------

enum class FilterMode { Gradient, Variable };

/// A contiguous block of design parameters sharing a variable map:
/// p = offset + scale * (F x) in variable mode, p = offset + scale * x
/// otherwise, with F the optional hat filter.
struct VariableGroup {
  std::string name;
  std::size_t first = 0, count = 0;  ///< slice of the parameter list
  double offset = 0.0, scale = 1.0;
  std::optional<HatFilter> filter;
  FilterMode mode = FilterMode::Gradient;
  VectorXd lb, ub;  ///< bounds in variable space
  std::optional<double> volume_budget;  ///< Σ p over the group ≤ budget
};

enum class OptimizerKind { GradientDescent, Adam, Mma };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::GradientDescent;
  double step = 0.1;  ///< GD step or Adam learning rate
  AdamState adam;
  MmaConfig mma;
};

struct HistoryEntry {
  long iteration = 0;
  double objective = 0.0;
  std::vector<double> constraints;
  std::vector<std::pair<std::string, double>> extras;
};

struct OptimizationHistory {
  std::vector<HistoryEntry> entries;
  VectorXd x;  ///< final variables
  VectorXd p;  ///< final physical parameters
  std::optional<std::string> error;  ///< set when a solver failure aborted the run
};

struct OptimizationProblem {
  ParameterSet params;
  Objective objective;
  std::vector<VariableGroup> groups;
  SolverChoice solver;
  /// Named diagnostics recorded each iteration.
  std::function<std::vector<std::pair<std::string, double>>(const SensitivityResult&)> diagnostics;
  /// Called after every optimizer step (e.g. advancing ε₁).
  std::function<void()> after_step;
};

struct IterationView {
  long iteration;
  const VectorXd& x;
  const VectorXd& p;
  const StructuralModel& model;
  const SensitivityResult& result;
};

/// Physical parameters from variables.
inline VectorXd map_variables(const OptimizationProblem& prob, const VectorXd& x) {
  VectorXd p(x.size());
  for (const auto& g : prob.groups) {
    VectorXd xs = x.segment(static_cast<Index>(g.first), static_cast<Index>(g.count));
    if (g.filter && g.mode == FilterMode::Variable) xs = g.filter->apply(xs);
    p.segment(static_cast<Index>(g.first), static_cast<Index>(g.count)) = (g.offset + g.scale * xs.array()).matrix();
  }
  return p;
}

/// Chains a parameter-space gradient back to variable space (or, in gradient
/// mode, filters it).
inline VectorXd map_gradient(const OptimizationProblem& prob, const VectorXd& grad_p) {
  VectorXd gx(grad_p.size());
  for (const auto& g : prob.groups) {
    VectorXd gs = g.scale * grad_p.segment(static_cast<Index>(g.first), static_cast<Index>(g.count));
    if (g.filter) gs = g.mode == FilterMode::Variable ? g.filter->apply_transpose(gs) : g.filter->apply(gs);
    gx.segment(static_cast<Index>(g.first), static_cast<Index>(g.count)) = gs;
  }
  return gx;
}

/// max_j |u_j| over one displacement component.
inline double max_abs_component(const VectorXd& u, int component) {
  double m = 0.0;
  for (Index j = component; j < u.size(); j += kDofPerNode) m = std::max(m, std::abs(u(j)));
  return m;
}

/// Runs `max_iter` optimizer steps from `x0`. History entry k holds the
/// evaluation at the k-th iterate (entry 0 = initial design).
inline OptimizationHistory run_optimization(OptimizationProblem& prob, OptimizerConfig opt, const VectorXd& x0,
                                            long max_iter,
                                            const std::function<void(const IterationView&)>& on_iteration = {}) {
  const Index n = static_cast<Index>(prob.params.size());
  if (x0.size() != n) throw Error("initial design has wrong length");
  std::size_t covered = 0;
  for (const auto& g : prob.groups) {
    if (g.first != covered) throw Error("variable groups must tile the parameter list in order");
    covered += g.count;
    if (g.lb.size() != static_cast<Index>(g.count) || g.ub.size() != static_cast<Index>(g.count))
      throw Error("group '" + g.name + "': bounds have wrong length");
    if (g.filter && g.filter->size() != static_cast<Index>(g.count))
      throw Error("group '" + g.name + "': filter size does not match the group");
  }
  if (covered != prob.params.size()) throw Error("variable groups do not cover every parameter");

  VectorXd lb(n), ub(n);
  for (const auto& g : prob.groups) {
    lb.segment(static_cast<Index>(g.first), static_cast<Index>(g.count)) = g.lb;
    ub.segment(static_cast<Index>(g.first), static_cast<Index>(g.count)) = g.ub;
  }
  std::vector<const VariableGroup*> budgets;
  for (const auto& g : prob.groups)
    if (g.volume_budget) budgets.push_back(&g);
  if (!budgets.empty() && opt.kind != OptimizerKind::Mma)
    throw Error("volume constraints require the mma optimizer");

  OptimizationHistory hist;
  VectorXd x = clamp(x0, lb, ub);
  MmaState mma{opt.mma};
  for (long it = 0;; ++it) {
    const VectorXd p = map_variables(prob, x);
    SensitivityResult r;
    try {
      r = sensitivity(prob.params, p, prob.objective, prob.solver);
    } catch (const NumericalError& e) {
      hist.error = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }
    HistoryEntry h;
    h.iteration = it;
    h.objective = r.value;
    VectorXd gvals(static_cast<Index>(budgets.size()));
    Eigen::MatrixXd dg = Eigen::MatrixXd::Zero(static_cast<Index>(budgets.size()), n);
    for (std::size_t i = 0; i < budgets.size(); ++i) {
      const auto& g = *budgets[i];
      const double vol = p.segment(static_cast<Index>(g.first), static_cast<Index>(g.count)).sum();
      gvals(static_cast<Index>(i)) = vol - *g.volume_budget;
      VectorXd ones = VectorXd::Zero(n);
      ones.segment(static_cast<Index>(g.first), static_cast<Index>(g.count)).setOnes();
      dg.row(static_cast<Index>(i)) = map_gradient(prob, ones).transpose();
      h.constraints.push_back(vol);
    }
    if (prob.diagnostics) h.extras = prob.diagnostics(r);
    hist.entries.push_back(h);
    hist.x = x;
    hist.p = p;
    if (on_iteration) {
      const StructuralModel m = prob.params.realize(p);
      on_iteration(IterationView{it, x, p, m, r});
    }
    if (it >= max_iter) break;

    const VectorXd gx = map_gradient(prob, r.gradient);
    switch (opt.kind) {
      case OptimizerKind::GradientDescent:
        x = gd_step(x, gx, opt.step, &lb, &ub);
        break;
      case OptimizerKind::Adam:
        opt.adam.lr = opt.step;
        x = clamp(adam_step(opt.adam, x, gx), lb, ub);
        break;
      case OptimizerKind::Mma:
        x = clamp(mma_step(mma, x, gx, gvals, dg, lb, ub), lb, ub);
        break;
    }
    if (prob.after_step) prob.after_step();
  }
  return hist;
}

}  // namespace sso
