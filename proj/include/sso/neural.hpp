#pragma once

// Neural reparameterization of shape + density design: a small MLP maps a
// per-node centrality feature to (shape, density) fields, and the structural
// loss is backpropagated through the adjoint sensitivities and the filters.

#include "sso/core.hpp"
#include "sso/model.hpp"
#include "sso/optimize.hpp"
#include "sso/sensitivity.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace sso {

enum class OutputSquash { Sigmoid, Softmax };

/// Fully connected network with ReLU hidden layers. Parameters live in one
/// flat vector: per layer, W (out × in, column-major) followed by b (out).
class Mlp {
 public:
  struct Cache {
    std::vector<Eigen::MatrixXd> h;  ///< layer inputs, h[0] = X
    std::vector<Eigen::MatrixXd> z;  ///< pre-activations
    Eigen::MatrixXd y;               ///< outputs
  };

  Mlp() = default;

  explicit Mlp(std::vector<int> widths, OutputSquash squash = OutputSquash::Sigmoid)
      : widths_(std::move(widths)), squash_(squash) {
    if (widths_.size() < 2) throw Error("mlp: need at least an input and an output width");
    for (int w : widths_)
      if (w <= 0) throw Error("mlp: layer widths must be positive");
  }

  const std::vector<int>& widths() const { return widths_; }
  OutputSquash squash() const { return squash_; }
  std::size_t layers() const { return widths_.size() - 1; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l)
      n += static_cast<std::size_t>(widths_[l + 1]) * static_cast<std::size_t>(widths_[l] + 1);
    return n;
  }

  /// Glorot-uniform weights, zero biases.
  VectorXd init(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    VectorXd theta = VectorXd::Zero(static_cast<Index>(parameter_count()));
    Index off = 0;
    for (std::size_t l = 0; l < layers(); ++l) {
      const int in = widths_[l], out = widths_[l + 1];
      const double a = std::sqrt(6.0 / (in + out));
      std::uniform_real_distribution<double> U(-a, a);
      for (Index k = 0; k < static_cast<Index>(in) * out; ++k) theta(off + k) = U(rng);
      off += static_cast<Index>(in) * out + out;
    }
    return theta;
  }

  /// X is (samples × input width); returns (samples × output width).
  Eigen::MatrixXd forward(const VectorXd& theta, const Eigen::MatrixXd& X, Cache* cache = nullptr) const {
    check(theta);
    if (X.cols() != widths_.front()) throw Error("mlp: feature width mismatch");
    Eigen::MatrixXd h = X;
    if (cache) {
      cache->h.assign(1, X);
      cache->z.clear();
    }
    Index off = 0;
    for (std::size_t l = 0; l < layers(); ++l) {
      const int in = widths_[l], out = widths_[l + 1];
      Eigen::Map<const Eigen::MatrixXd> W(theta.data() + off, out, in);
      Eigen::Map<const VectorXd> b(theta.data() + off + static_cast<Index>(in) * out, out);
      off += static_cast<Index>(in) * out + out;
      Eigen::MatrixXd z = h * W.transpose();
      z.rowwise() += b.transpose();
      if (cache) cache->z.push_back(z);
      if (l + 1 < layers()) {
        h = z.cwiseMax(0.0);
        if (cache) cache->h.push_back(h);
      } else {
        h = squash(z);
      }
    }
    if (cache) cache->y = h;
    return h;
  }

  /// Gradient of a scalar loss with respect to theta, given dLoss/dY.
  VectorXd backward(const VectorXd& theta, const Cache& cache, const Eigen::MatrixXd& dY) const {
    check(theta);
    VectorXd grad = VectorXd::Zero(theta.size());
    Eigen::MatrixXd dz;
    if (squash_ == OutputSquash::Sigmoid) {
      dz = dY.cwiseProduct(cache.y.cwiseProduct((1.0 - cache.y.array()).matrix()));
    } else {
      const VectorXd s = dY.cwiseProduct(cache.y).rowwise().sum();
      dz = cache.y.cwiseProduct((dY.colwise() - s));
    }
    std::vector<Index> offsets(layers() + 1, 0);
    for (std::size_t l = 0; l < layers(); ++l)
      offsets[l + 1] = offsets[l] + static_cast<Index>(widths_[l]) * widths_[l + 1] + widths_[l + 1];
    for (std::size_t l = layers(); l-- > 0;) {
      const int in = widths_[l], out = widths_[l + 1];
      const Index off = offsets[l];
      Eigen::Map<const Eigen::MatrixXd> W(theta.data() + off, out, in);
      Eigen::Map<Eigen::MatrixXd> dW(grad.data() + off, out, in);
      Eigen::Map<VectorXd> db(grad.data() + off + static_cast<Index>(in) * out, out);
      dW = dz.transpose() * cache.h[l];
      db = dz.colwise().sum().transpose();
      if (l > 0) {
        const Eigen::MatrixXd dh = dz * W;
        dz = dh.cwiseProduct((cache.z[l - 1].array() > 0.0).cast<double>().matrix());
      }
    }
    return grad;
  }

 private:
  void check(const VectorXd& theta) const {
    if (theta.size() != static_cast<Index>(parameter_count()))
      throw Error("mlp: expected " + std::to_string(parameter_count()) + " parameters, got " +
                  std::to_string(theta.size()));
  }
  Eigen::MatrixXd squash(const Eigen::MatrixXd& z) const {
    if (squash_ == OutputSquash::Sigmoid) return (1.0 / (1.0 + (-z.array()).exp())).matrix();
    Eigen::MatrixXd e = (z.colwise() - z.rowwise().maxCoeff()).array().exp().matrix();
    const VectorXd s = e.rowwise().sum();
    for (Index r = 0; r < e.rows(); ++r) e.row(r) /= s(r);
    return e;
  }

  std::vector<int> widths_;
  OutputSquash squash_ = OutputSquash::Sigmoid;
};

/// c_i = Σ_b ‖(X_i, Y_i) − (X_b, Y_b)‖ over supports b, divided by its max
/// over nodes. Sorted-node order.
inline VectorXd centrality_features(const StructuralModel& m, const std::vector<int>& support_nodes) {
  if (support_nodes.empty()) throw Error("centrality: at least one support node is required");
  const auto nodes = m.nodes();
  VectorXd c = VectorXd::Zero(static_cast<Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (int s : support_nodes) {
      const Node& b = m.node(s);
      c(static_cast<Index>(i)) += std::hypot(nodes[i].x - b.x, nodes[i].y - b.y);
    }
  const double mx = c.maxCoeff();
  if (!(mx > 0.0)) throw Error("centrality: all nodes coincide with the supports in plan");
  return c / mx;
}

/// (quads × nodes) averaging operator: each quad takes the mean of its four
/// nodal values. Node columns follow sorted-node order.
inline Eigen::SparseMatrix<double, Eigen::RowMajor> nodal_average_operator(const StructuralModel& m) {
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t q = 0; q < m.quads().size(); ++q)
    for (int ni : m.quad_node_indices(q)) t.emplace_back(static_cast<int>(q), ni, 0.25);
  Eigen::SparseMatrix<double, Eigen::RowMajor> A(static_cast<Index>(m.quads().size()),
                                                 static_cast<Index>(m.nodes().size()));
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

inline VectorXd nodal_to_element_density(const StructuralModel& m, const VectorXd& nodal) {
  if (nodal.size() != static_cast<Index>(m.nodes().size())) throw Error("nodal field length != node count");
  return nodal_average_operator(m) * nodal;
}

struct NnLossConfig {
  double alpha1 = 1.0;
  double alpha2 = 0.1;
  double V_star = 1.0;
};

/// g = fᵀu/α₁ + α₂ (Σp_T/V* − 1)².
inline double nn_loss(const VectorXd& u, const VectorXd& f, const VectorXd& p_T, const NnLossConfig& c) {
  if (c.alpha1 == 0.0) throw Error("nn loss: alpha1 must be nonzero");
  if (!(c.V_star > 0.0)) throw Error("nn loss: V* must be positive");
  const double r = p_T.sum() / c.V_star - 1.0;
  return f.dot(u) / c.alpha1 + c.alpha2 * r * r;
}

/// The loss as an adjoint objective over a parameter list whose density
/// parameters are the p_T entries.
inline Objective nn_loss_objective(NnLossConfig c) {
  return [c](const ObjectiveContext& ctx) {
    if (c.alpha1 == 0.0) throw Error("nn loss: alpha1 must be nonzero");
    double sum = 0.0;
    for (std::size_t k = 0; k < ctx.params.size(); ++k)
      if (ctx.params.params()[k].kind == ParameterKind::DensityRatio) sum += ctx.p(static_cast<Index>(k));
    const double r = sum / c.V_star - 1.0;
    ObjectiveEval e;
    e.value = ctx.f.dot(ctx.u) / c.alpha1 + c.alpha2 * r * r;
    e.dg_du = ctx.f / c.alpha1;
    e.dg_dp = VectorXd::Zero(ctx.p.size());
    for (std::size_t k = 0; k < ctx.params.size(); ++k)
      if (ctx.params.params()[k].kind == ParameterKind::DensityRatio)
        e.dg_dp(static_cast<Index>(k)) = 2.0 * c.alpha2 * r / c.V_star;
    return e;
  };
}

struct NnConfig {
  std::vector<int> widths{1, 40, 40, 40, 2};
  OutputSquash squash = OutputSquash::Sigmoid;
  double lr = 0.01;
  int epochs = 100;
  double alpha2_start = 0.1, alpha2_step = 0.05;
  double P_start = 2.0, P_step = 0.06, P_cap = 8.0;
  double V_star = 1.0;
  std::uint64_t seed = 0;
  double p_min = 0.01;
  ShapeBox box{0.0, 3.0};
  double shape_radius = 0.0;    ///< hat filter over nodes
  double density_radius = 0.0;  ///< hat filter over element centroids
  bool design_supports = false; ///< let supported nodes move in Z

  double alpha2_at(int epoch) const { return alpha2_start + alpha2_step * epoch; }
  double P_at(int epoch) const { return std::min(P_start + P_step * epoch, P_cap); }
};

/// Fields produced by one forward pass.
struct NnFields {
  VectorXd p_S;      ///< filtered shape variable per node
  VectorXd z;        ///< Z per node
  VectorXd p_T;      ///< density per quad
  Eigen::MatrixXd y; ///< raw network outputs
};

struct NnEvaluation {
  double loss = 0.0;
  double compliance = 0.0;  ///< fᵀu
  double sum_pT = 0.0;
  NnFields fields;
  VectorXd grad_theta;
  VectorXd grad_outputs;  ///< dLoss/dY flattened column-major (diagnostics)
};

/// Structural problem driven by an MLP over node features.
class NnProblem {
 public:
  NnProblem(StructuralModel base, NnConfig cfg) : base_(std::move(base)), cfg_(std::move(cfg)), mlp_(cfg_.widths, cfg_.squash) {
    if (base_.quads().empty()) throw Error("nn problem: model has no quad shells");
    if (cfg_.widths.front() != 1 || cfg_.widths.back() != 2)
      throw Error("nn problem: network must map 1 feature to 2 outputs");
    if (!(cfg_.V_star > 0.0)) throw Error("nn problem: V* must be positive");
    if (!(cfg_.p_min > 0.0 && cfg_.p_min < 1.0)) throw Error("nn problem: p_min must lie in (0, 1)");
    cfg_.box.validate();
    features_ = centrality_features(base_, base_.supported_nodes());
    average_ = nodal_average_operator(base_);

    std::vector<int> all_nodes;
    for (const auto& n : base_.nodes()) all_nodes.push_back(n.id);
    node_filter_ = HatFilter(node_positions(base_, all_nodes), cfg_.shape_radius);
    std::vector<int> quad_ids;
    for (const auto& q : base_.quads()) quad_ids.push_back(q.id);
    elem_filter_ = HatFilter(element_centroids(base_, quad_ids), cfg_.density_radius);

    const auto supported = base_.supported_nodes();
    for (std::size_t i = 0; i < all_nodes.size(); ++i) {
      const bool fixed = std::binary_search(supported.begin(), supported.end(), all_nodes[i]);
      if (cfg_.design_supports || !fixed) design_nodes_.push_back(static_cast<int>(i));
    }
  }

  const Mlp& mlp() const { return mlp_; }
  const NnConfig& config() const { return cfg_; }
  const StructuralModel& base() const { return base_; }
  const VectorXd& features() const { return features_; }

  NnFields fields(const VectorXd& theta, Mlp::Cache* cache = nullptr) const {
    NnFields f;
    f.y = mlp_.forward(theta, features_, cache);
    f.p_S = node_filter_.apply(f.y.col(0));
    f.z = VectorXd(static_cast<Index>(base_.nodes().size()));
    for (std::size_t i = 0; i < base_.nodes().size(); ++i) f.z(static_cast<Index>(i)) = base_.nodes()[i].z;
    for (int i : design_nodes_) f.z(i) = cfg_.box.z_min + cfg_.box.span() * f.p_S(i);
    const VectorXd rho = elem_filter_.apply(average_ * f.y.col(1));
    f.p_T = (cfg_.p_min + (1.0 - cfg_.p_min) * rho.array()).matrix();
    return f;
  }

  ParameterSet parameter_set(const NnFields& f, double P) const {
    std::vector<DesignParameter> ps;
    ps.reserve(design_nodes_.size() + base_.quads().size());
    for (int i : design_nodes_) ps.push_back(DesignParameter::node_coord(base_.nodes()[static_cast<std::size_t>(i)].id, 2, f.z(i)));
    for (std::size_t q = 0; q < base_.quads().size(); ++q)
      ps.push_back(DesignParameter::density(base_.quads()[q].id, std::clamp(f.p_T(static_cast<Index>(q)), cfg_.p_min, 1.0)));
    return ParameterSet(base_, std::move(ps), SimpConfig{P, cfg_.p_min});
  }

  /// Parameter vector with the exact densities (the stored values are
  /// clamped only to pass range validation against rounding).
  static VectorXd parameter_values(const ParameterSet& ps, const NnFields& f) {
    VectorXd p = ps.values();
    p.tail(f.p_T.size()) = f.p_T;
    return p;
  }

  /// fᵀu for the design produced by theta (used to fix α₁).
  double compliance(const VectorXd& theta, double P, const SolverChoice& solver = {}) const {
    const NnFields f = fields(theta);
    const ParameterSet ps = parameter_set(f, P);
    const StructuralModel m = ps.realize(parameter_values(ps, f));
    const AugmentedSystem sys = assemble(m);
    const Solution s = solve(sys, solver, &m);
    return sys.f_aug.head(sys.dof).dot(s.u);
  }

  NnEvaluation evaluate(const VectorXd& theta, const NnLossConfig& lc, double P, bool want_grad = true,
                        const SolverChoice& solver = {}) const {
    Mlp::Cache cache;
    NnEvaluation ev;
    ev.fields = fields(theta, &cache);
    const ParameterSet ps = parameter_set(ev.fields, P);
    const VectorXd p = parameter_values(ps, ev.fields);
    const SensitivityResult r = sensitivity(ps, p, nn_loss_objective(lc), solver);
    ev.loss = r.value;
    ev.compliance = r.f.dot(r.u);
    ev.sum_pT = ev.fields.p_T.sum();
    if (!want_grad) return ev;

    const Index nd = static_cast<Index>(design_nodes_.size());
    VectorXd g_pS = VectorXd::Zero(static_cast<Index>(base_.nodes().size()));
    for (Index k = 0; k < nd; ++k) g_pS(design_nodes_[static_cast<std::size_t>(k)]) = cfg_.box.span() * r.gradient(k);
    const VectorXd g_pT = r.gradient.tail(ev.fields.p_T.size());
    Eigen::MatrixXd dY(ev.fields.y.rows(), 2);
    dY.col(0) = node_filter_.apply_transpose(g_pS);
    dY.col(1) = average_.transpose() * elem_filter_.apply_transpose((1.0 - cfg_.p_min) * g_pT);
    ev.grad_outputs = Eigen::Map<const VectorXd>(dY.data(), dY.size());
    ev.grad_theta = mlp_.backward(theta, cache, dY);
    return ev;
  }

 private:
  StructuralModel base_;
  NnConfig cfg_;
  Mlp mlp_;
  VectorXd features_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> average_;
  HatFilter node_filter_, elem_filter_;
  std::vector<int> design_nodes_;  ///< sorted-node indices whose Z is designed
};

struct TrainRecord {
  int epoch = 0;
  double loss = 0.0;
  double strain_energy = 0.0;  ///< 0.5 fᵀu
  double sum_pT = 0.0;
  double alpha2 = 0.0;
  double P = 0.0;
};

struct TrainResult {
  VectorXd theta;
  double alpha1 = 0.0;
  std::vector<TrainRecord> history;
  std::optional<std::string> error;
};

/// Adam training over cfg.epochs epochs. α₁ is fᵀu at the first forward pass.
inline TrainResult train(const NnProblem& prob, const SolverChoice& solver = {},
                         const std::function<void(const TrainRecord&)>& on_epoch = {}) {
  const NnConfig& cfg = prob.config();
  TrainResult out;
  out.theta = prob.mlp().init(cfg.seed);
  AdamState adam;
  adam.lr = cfg.lr;
  for (int e = 0; e < cfg.epochs; ++e) {
    const double P = cfg.P_at(e);
    NnEvaluation ev;
    try {
      if (e == 0) out.alpha1 = prob.compliance(out.theta, P, solver);
      ev = prob.evaluate(out.theta, NnLossConfig{out.alpha1, cfg.alpha2_at(e), cfg.V_star}, P, true, solver);
    } catch (const NumericalError& err) {
      out.error = "epoch " + std::to_string(e) + ": " + err.what();
      break;
    }
    TrainRecord rec{e, ev.loss, 0.5 * ev.compliance, ev.sum_pT, cfg.alpha2_at(e), P};
    out.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (cfg.lr > 0.0) out.theta = adam_step(adam, out.theta, ev.grad_theta);
  }
  return out;
}

}  // namespace sso
