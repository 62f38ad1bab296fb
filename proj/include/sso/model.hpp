#pragma once

// Structural model: nodes, supports, nodal loads, beam-columns and quad
// shells, plus the global DOF numbering fixed at finalization.
//
// DOF numbering is node-major, component-minor over nodes sorted by id:
// the c-th component of the i-th node (in sorted order) is DOF 6*i + c.

#include "sso/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace sso {

using Mask6 = std::array<bool, 6>;
using Values6 = std::array<double, 6>;

struct Node {
  int id = 0;
  double x = 0.0, y = 0.0, z = 0.0;
  Vec3 position() const { return {x, y, z}; }
};

struct Support {
  int node = 0;
  Mask6 mask{};
  Values6 prescribed{};
  int count() const { return static_cast<int>(std::count(mask.begin(), mask.end(), true)); }
};

struct NodalLoad {
  int node = 0;
  Values6 components{};
};

struct BeamColumnSpec {
  int id = 0;
  int i_node = 0, j_node = 0;
  double E = 0.0, G = 0.0;
  double Iy = 0.0, Iz = 0.0, J = 0.0, A = 0.0;
};

struct QuadShellSpec {
  int id = 0;
  std::array<int, 4> nodes{};
  double t = 0.0, E = 0.0, nu = 0.0;
  double kappa_x = 1.0, kappa_y = 1.0;
};

enum class ElementKind { BeamColumn, QuadShell };

struct ElementRef {
  ElementKind kind;
  std::size_t index;  ///< position in the per-kind table
};

class ModelBuilder;

/// Finalized, immutable structural model. Cheap to copy (shared storage).
class StructuralModel {
 public:
  struct Data {
    std::vector<Node> nodes;                  // sorted by id
    std::vector<BeamColumnSpec> beams;        // insertion order
    std::vector<QuadShellSpec> quads;         // insertion order
    std::vector<Support> supports;            // merged, sorted by node id
    std::vector<NodalLoad> loads;             // accumulated, sorted by node id
    std::vector<std::array<int, 2>> beam_nodes;  // node indices per beam
    std::vector<std::array<int, 4>> quad_nodes;  // node indices per quad
    std::map<int, ElementRef> elements;          // element id -> table slot
    std::vector<Index> constrained_dofs;         // row order of V
    std::vector<double> prescribed_values;       // b
  };

  StructuralModel() = default;

  Index dof() const { return static_cast<Index>(data_->nodes.size()) * kDofPerNode; }
  Index dof_bc() const { return static_cast<Index>(data_->constrained_dofs.size()); }

  std::span<const Node> nodes() const { return data_->nodes; }
  std::span<const BeamColumnSpec> beams() const { return data_->beams; }
  std::span<const QuadShellSpec> quads() const { return data_->quads; }
  std::span<const Support> supports() const { return data_->supports; }
  std::span<const NodalLoad> loads() const { return data_->loads; }
  std::span<const Index> constrained_dofs() const { return data_->constrained_dofs; }
  std::span<const double> prescribed_values() const { return data_->prescribed_values; }

  const std::array<int, 2>& beam_node_indices(std::size_t b) const { return data_->beam_nodes[b]; }
  const std::array<int, 4>& quad_node_indices(std::size_t q) const { return data_->quad_nodes[q]; }

  std::size_t element_count() const { return data_->beams.size() + data_->quads.size(); }

  /// Index of node `id` in sorted order, or -1.
  int node_index(int id) const {
    const auto& n = data_->nodes;
    auto it = std::lower_bound(n.begin(), n.end(), id,
                               [](const Node& a, int key) { return a.id < key; });
    return (it != n.end() && it->id == id) ? static_cast<int>(it - n.begin()) : -1;
  }
  bool has_node(int id) const { return node_index(id) >= 0; }

  const Node& node(int id) const {
    const int i = node_index(id);
    if (i < 0) throw ModelError("unknown node " + std::to_string(id));
    return data_->nodes[static_cast<std::size_t>(i)];
  }

  Index dof_index(int node_id, int component) const {
    const int i = node_index(node_id);
    if (i < 0) throw ModelError("unknown node " + std::to_string(node_id));
    return static_cast<Index>(i) * kDofPerNode + component;
  }

  std::optional<ElementRef> find_element(int id) const {
    auto it = data_->elements.find(id);
    if (it == data_->elements.end()) return std::nullopt;
    return it->second;
  }

  /// Ids of nodes carrying at least one support condition, ascending.
  std::vector<int> supported_nodes() const {
    std::vector<int> out;
    for (const auto& s : data_->supports) out.push_back(s.node);
    return out;
  }

  /// Node coordinates as a (n x 3) matrix in sorted node order.
  Eigen::MatrixX3d coordinates() const {
    Eigen::MatrixX3d X(static_cast<Index>(data_->nodes.size()), 3);
    for (std::size_t i = 0; i < data_->nodes.size(); ++i) {
      const auto& n = data_->nodes[i];
      X.row(static_cast<Index>(i)) << n.x, n.y, n.z;
    }
    return X;
  }

  /// Returns a copy whose geometry or element properties were edited by `fn`.
  /// Topology (node set, connectivity, supports) must not be changed by `fn`;
  /// the DOF map is carried over unchanged.
  StructuralModel with_edits(const std::function<void(Data&)>& fn) const {
    auto copy = std::make_shared<Data>(*data_);
    fn(*copy);
    StructuralModel m;
    m.data_ = std::move(copy);
    return m;
  }

  const Data& data() const { return *data_; }

 private:
  friend class ModelBuilder;
  std::shared_ptr<const Data> data_ = std::make_shared<Data>();
};

/// Accumulates model definitions and validates them. Single-threaded.
class ModelBuilder {
 public:
  ModelBuilder& add_node(int id, double x, double y, double z) {
    if (nodes_.count(id)) throw ModelError("duplicate node id " + std::to_string(id));
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
      throw ModelError("node " + std::to_string(id) + ": non-finite coordinate");
    nodes_.emplace(id, Node{id, x, y, z});
    return *this;
  }

  /// Repeated supports on one node merge by OR; later prescribed values win.
  ModelBuilder& add_support(int node, const Mask6& mask, const Values6& prescribed = {}) {
    require_node(node, "support");
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
      throw ModelError("support on node " + std::to_string(node) + ": empty mask");
    for (double v : prescribed)
      if (!std::isfinite(v))
        throw ModelError("support on node " + std::to_string(node) + ": non-finite prescribed value");
    auto [it, inserted] = supports_.try_emplace(node, Support{node, {}, {}});
    for (int c = 0; c < kDofPerNode; ++c) {
      if (!mask[c]) continue;
      it->second.mask[c] = true;
      it->second.prescribed[c] = prescribed[c];
    }
    return *this;
  }

  ModelBuilder& add_nodal_load(int node, const Values6& components) {
    require_node(node, "load");
    for (double v : components)
      if (!std::isfinite(v))
        throw ModelError("load on node " + std::to_string(node) + ": non-finite component");
    auto [it, inserted] = loads_.try_emplace(node, NodalLoad{node, {}});
    for (int c = 0; c < kDofPerNode; ++c) it->second.components[c] += components[c];
    return *this;
  }

  ModelBuilder& add_beamcol(const BeamColumnSpec& s) {
    const std::string who = "beamcol " + std::to_string(s.id);
    check_element_id(s.id);
    require_node(s.i_node, who);
    require_node(s.j_node, who);
    if (s.i_node == s.j_node) throw ModelError(who + ": i_node equals j_node");
    positive(s.E, who, "E");
    positive(s.G, who, "G");
    positive(s.Iy, who, "Iy");
    positive(s.Iz, who, "Iz");
    positive(s.J, who, "J");
    positive(s.A, who, "A");
    const Vec3 d = nodes_.at(s.j_node).position() - nodes_.at(s.i_node).position();
    if (!(d.norm() > 0.0)) throw ModelError(who + ": zero length");
    element_ids_.insert(s.id);
    elements_.push_back({ElementKind::BeamColumn, beams_.size()});
    beams_.push_back(s);
    return *this;
  }

  ModelBuilder& add_quad(const QuadShellSpec& s) {
    const std::string who = "quad " + std::to_string(s.id);
    check_element_id(s.id);
    for (int n : s.nodes) require_node(n, who);
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        if (s.nodes[a] == s.nodes[b]) throw ModelError(who + ": repeated node " + std::to_string(s.nodes[a]));
    positive(s.t, who, "t");
    positive(s.E, who, "E");
    if (!(s.nu >= 0.0 && s.nu < 0.5)) throw ModelError(who + ": nu must lie in [0, 0.5)");
    positive(s.kappa_x, who, "kappa_x");
    positive(s.kappa_y, who, "kappa_y");
    std::array<Vec3, 4> X;
    for (int a = 0; a < 4; ++a) X[a] = nodes_.at(s.nodes[a]).position();
    if (!((X[2] - X[0]).cross(X[3] - X[1]).norm() > 0.0))
      throw ModelError(who + ": degenerate quadrilateral (zero projected area)");
    element_ids_.insert(s.id);
    elements_.push_back({ElementKind::QuadShell, quads_.size()});
    quads_.push_back(s);
    return *this;
  }

  StructuralModel finalize() const {
    if (supports_.empty()) throw ModelError("model has no supports");

    auto data = std::make_shared<StructuralModel::Data>();
    data->nodes.reserve(nodes_.size());
    for (const auto& [id, n] : nodes_) data->nodes.push_back(n);  // std::map: sorted
    data->beams = beams_;
    data->quads = quads_;
    for (const auto& [id, s] : supports_) data->supports.push_back(s);
    for (const auto& [id, l] : loads_) data->loads.push_back(l);

    std::map<int, int> index;
    for (std::size_t i = 0; i < data->nodes.size(); ++i) index[data->nodes[i].id] = static_cast<int>(i);
    for (const auto& b : beams_) data->beam_nodes.push_back({index.at(b.i_node), index.at(b.j_node)});
    for (const auto& q : quads_)
      data->quad_nodes.push_back({index.at(q.nodes[0]), index.at(q.nodes[1]), index.at(q.nodes[2]),
                                  index.at(q.nodes[3])});
    for (std::size_t e = 0; e < elements_.size(); ++e) {
      const auto& ref = elements_[e];
      const int id = ref.kind == ElementKind::BeamColumn ? beams_[ref.index].id : quads_[ref.index].id;
      data->elements.emplace(id, ref);
    }
    for (const auto& s : data->supports) {
      const Index base = static_cast<Index>(index.at(s.node)) * kDofPerNode;
      for (int c = 0; c < kDofPerNode; ++c) {
        if (!s.mask[c]) continue;
        data->constrained_dofs.push_back(base + c);
        data->prescribed_values.push_back(s.prescribed[c]);
      }
    }
    StructuralModel m;
    m.data_ = std::move(data);
    return m;
  }

 private:
  void require_node(int id, const std::string& who) const {
    if (!nodes_.count(id)) throw ModelError(who + ": unknown node " + std::to_string(id));
  }
  void check_element_id(int id) const {
    if (element_ids_.count(id)) throw ModelError("duplicate element id " + std::to_string(id));
  }
  static void positive(double v, const std::string& who, const char* field) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ModelError(who + ": " + field + " must be positive");
  }

  std::map<int, Node> nodes_;
  std::map<int, Support> supports_;
  std::map<int, NodalLoad> loads_;
  std::vector<BeamColumnSpec> beams_;
  std::vector<QuadShellSpec> quads_;
  std::vector<ElementRef> elements_;
  std::set<int> element_ids_;
};

}  // namespace sso
