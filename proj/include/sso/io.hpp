#pragma once

// JSON model files, parameter specs, optimization scenarios and flat CSV
// output. Malformed input raises InputError carrying a JSON pointer.

#include "sso/core.hpp"
#include "sso/fixtures.hpp"
#include "sso/model.hpp"
#include "sso/neural.hpp"
#include "sso/optimize.hpp"
#include "sso/sensitivity.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace sso::io {

using json = nlohmann::json;

inline constexpr int kModelSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Field access with pointer-tagged errors
// ---------------------------------------------------------------------------

namespace detail {

inline std::string child(const std::string& ptr, const std::string& key) {
  std::string k;
  for (char c : key) {
    if (c == '~') k += "~0";
    else if (c == '/') k += "~1";
    else k += c;
  }
  return ptr + "/" + k;
}
inline std::string child(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

inline const json& field(const json& j, const std::string& key, const std::string& ptr) {
  if (!j.is_object()) throw InputError(ptr, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw InputError(child(ptr, key), "missing required field");
  return *it;
}

inline double number(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw InputError(ptr, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw InputError(ptr, "expected a finite number");
  return v;
}

inline double number(const json& j, const std::string& key, const std::string& ptr) {
  return number(field(j, key, ptr), child(ptr, key));
}

inline double number_or(const json& j, const std::string& key, double fallback, const std::string& ptr) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return number(j.at(key), child(ptr, key));
}

inline int integer(const json& j, const std::string& ptr) {
  if (!j.is_number_integer()) throw InputError(ptr, "expected an integer");
  const auto v = j.get<long long>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw InputError(ptr, "integer out of range");
  return static_cast<int>(v);
}

inline int integer(const json& j, const std::string& key, const std::string& ptr) {
  return integer(field(j, key, ptr), child(ptr, key));
}

inline int integer_or(const json& j, const std::string& key, int fallback, const std::string& ptr) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return integer(j.at(key), child(ptr, key));
}

inline std::string string_or(const json& j, const std::string& key, const std::string& fallback,
                             const std::string& ptr) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw InputError(child(ptr, key), "expected a string");
  return j.at(key).get<std::string>();
}

inline bool boolean_or(const json& j, const std::string& key, bool fallback, const std::string& ptr) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw InputError(child(ptr, key), "expected true or false");
  return j.at(key).get<bool>();
}

inline const json& array(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw InputError(ptr, "expected an array");
  return j;
}

inline const json& array_or_empty(const json& j, const std::string& key, const std::string& ptr) {
  static const json empty = json::array();
  if (!j.contains(key)) return empty;
  return array(j.at(key), child(ptr, key));
}

template <std::size_t N>
std::array<double, N> numbers(const json& j, const std::string& ptr) {
  array(j, ptr);
  if (j.size() != N) throw InputError(ptr, "expected " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = number(j[i], child(ptr, i));
  return out;
}

/// Runs `fn`, re-tagging model-construction errors with the item pointer.
template <typename Fn>
void at(const std::string& ptr, Fn&& fn) {
  try {
    fn();
  } catch (const InputError&) {
    throw;
  } catch (const ModelError& e) {
    throw InputError(ptr, e.what());
  }
}

inline int axis_from(const json& j, const std::string& ptr) {
  if (j.is_number_integer()) {
    const int a = integer(j, ptr);
    if (a < 0 || a > 2) throw InputError(ptr, "axis must be 0, 1 or 2");
    return a;
  }
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "X" || s == "x") return 0;
    if (s == "Y" || s == "y") return 1;
    if (s == "Z" || s == "z") return 2;
  }
  throw InputError(ptr, "axis must be \"X\", \"Y\" or \"Z\"");
}

inline int component_from(const json& j, const std::string& ptr) {
  if (j.is_number_integer()) {
    const int c = integer(j, ptr);
    if (c < 0 || c >= kDofPerNode) throw InputError(ptr, "component must lie in [0, 6)");
    return c;
  }
  if (j.is_string())
    for (int c = 0; c < kDofPerNode; ++c)
      if (j.get<std::string>() == component_name(c)) return c;
  throw InputError(ptr, "component must be one of UX, UY, UZ, RX, RY, RZ");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

/// Shortest round-trip decimal form of a double.
inline std::string fmt(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path + "'");
}

inline json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError("", source + ": malformed JSON at byte " + std::to_string(e.byte));
  }
}

inline json load_json(const std::string& path) { return parse_json(read_file(path), path); }

// ---------------------------------------------------------------------------
// Model schema
// ---------------------------------------------------------------------------

/// Builds a model from a `"sso_model": 1` document.
inline StructuralModel model_from_json(const json& j) {
  using namespace detail;
  const std::string root;
  if (!j.is_object()) throw InputError(root, "model document must be an object");
  const int version = integer(j, "sso_model", root);
  if (version != kModelSchemaVersion)
    throw InputError("/sso_model", "unsupported schema version " + std::to_string(version));

  ModelBuilder b;
  const json& nodes = array(field(j, "nodes", root), "/nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string p = child("/nodes", i);
    const json& n = nodes[i];
    const int id = integer(n, "id", p);
    const double x = number(n, "x", p), y = number(n, "y", p), z = number(n, "z", p);
    at(p, [&] { b.add_node(id, x, y, z); });
  }
  const json& beams = array_or_empty(j, "beamcols", root);
  for (std::size_t i = 0; i < beams.size(); ++i) {
    const std::string p = child("/beamcols", i);
    const json& e = beams[i];
    BeamColumnSpec s;
    s.id = integer(e, "id", p);
    s.i_node = integer(e, "i_node", p);
    s.j_node = integer(e, "j_node", p);
    s.E = number(e, "E", p);
    s.G = number(e, "G", p);
    s.Iy = number(e, "Iy", p);
    s.Iz = number(e, "Iz", p);
    s.J = number(e, "J", p);
    s.A = number(e, "A", p);
    at(p, [&] { b.add_beamcol(s); });
  }
  const json& quads = array_or_empty(j, "quads", root);
  for (std::size_t i = 0; i < quads.size(); ++i) {
    const std::string p = child("/quads", i);
    const json& e = quads[i];
    QuadShellSpec s;
    s.id = integer(e, "id", p);
    const json& nn = array(field(e, "nodes", p), child(p, "nodes"));
    if (nn.size() != 4) throw InputError(child(p, "nodes"), "expected 4 node ids");
    for (std::size_t a = 0; a < 4; ++a) s.nodes[a] = integer(nn[a], child(child(p, "nodes"), a));
    s.t = number(e, "t", p);
    s.E = number(e, "E", p);
    s.nu = number(e, "nu", p);
    s.kappa_x = number_or(e, "kappa_x", 1.0, p);
    s.kappa_y = number_or(e, "kappa_y", 1.0, p);
    at(p, [&] { b.add_quad(s); });
  }
  const json& supports = array_or_empty(j, "supports", root);
  for (std::size_t i = 0; i < supports.size(); ++i) {
    const std::string p = child("/supports", i);
    const json& s = supports[i];
    const int node = integer(s, "node", p);
    const json& m = array(field(s, "mask", p), child(p, "mask"));
    if (m.size() != 6) throw InputError(child(p, "mask"), "expected 6 entries");
    Mask6 mask{};
    for (std::size_t c = 0; c < 6; ++c) {
      const json& v = m[c];
      const std::string pc = child(child(p, "mask"), c);
      if (v.is_boolean()) mask[c] = v.get<bool>();
      else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) mask[c] = v.get<int>() == 1;
      else throw InputError(pc, "mask entries must be booleans or 0/1");
    }
    Values6 prescribed{};
    if (s.contains("prescribed")) prescribed = numbers<6>(s.at("prescribed"), child(p, "prescribed"));
    at(p, [&] { b.add_support(node, mask, prescribed); });
  }
  const json& loads = array_or_empty(j, "loads", root);
  for (std::size_t i = 0; i < loads.size(); ++i) {
    const std::string p = child("/loads", i);
    const int node = integer(loads[i], "node", p);
    const Values6 comp = numbers<6>(field(loads[i], "components", p), child(p, "components"));
    at(p, [&] { b.add_nodal_load(node, comp); });
  }
  StructuralModel m;
  at(root, [&] { m = b.finalize(); });
  return m;
}

inline json model_to_json(const StructuralModel& m) {
  json j;
  j["sso_model"] = kModelSchemaVersion;
  json nodes = json::array();
  for (const auto& n : m.nodes()) nodes.push_back({{"id", n.id}, {"x", n.x}, {"y", n.y}, {"z", n.z}});
  j["nodes"] = std::move(nodes);
  json supports = json::array();
  for (const auto& s : m.supports()) {
    json mask = json::array(), pres = json::array();
    bool any_prescribed = false;
    for (int c = 0; c < kDofPerNode; ++c) {
      mask.push_back(s.mask[c] ? 1 : 0);
      pres.push_back(s.prescribed[c]);
      any_prescribed = any_prescribed || s.prescribed[c] != 0.0;
    }
    json o{{"node", s.node}, {"mask", mask}};
    if (any_prescribed) o["prescribed"] = pres;
    supports.push_back(std::move(o));
  }
  j["supports"] = std::move(supports);
  json loads = json::array();
  for (const auto& l : m.loads())
    loads.push_back({{"node", l.node}, {"components", std::vector<double>(l.components.begin(), l.components.end())}});
  j["loads"] = std::move(loads);
  json beams = json::array();
  for (const auto& b : m.beams())
    beams.push_back({{"id", b.id}, {"i_node", b.i_node}, {"j_node", b.j_node}, {"E", b.E}, {"G", b.G},
                     {"Iy", b.Iy}, {"Iz", b.Iz}, {"J", b.J}, {"A", b.A}});
  j["beamcols"] = std::move(beams);
  json quads = json::array();
  for (const auto& q : m.quads()) {
    json o{{"id", q.id}, {"nodes", std::vector<int>(q.nodes.begin(), q.nodes.end())}, {"t", q.t}, {"E", q.E}, {"nu", q.nu}};
    if (q.kappa_x != 1.0) o["kappa_x"] = q.kappa_x;
    if (q.kappa_y != 1.0) o["kappa_y"] = q.kappa_y;
    quads.push_back(std::move(o));
  }
  j["quads"] = std::move(quads);
  return j;
}

// ---------------------------------------------------------------------------
// Fixtures by name
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& fixture_names() {
  static const std::vector<std::string> names{"arch2d", "barrel", "dome", "gridshell", "multispan", "plate"};
  return names;
}

/// Generates a named fixture; `opt` overrides the generator defaults.
inline fixtures::Fixture fixture_from_json(const std::string& name, const json& opt, const std::string& ptr = "") {
  using namespace detail;
  if (!opt.is_null() && !opt.is_object()) throw InputError(ptr, "fixture options must be an object");
  const json o = opt.is_null() ? json::object() : opt;
  auto num = [&](const char* k, double& v) { v = number_or(o, k, v, ptr); };
  auto integ = [&](const char* k, int& v) { v = integer_or(o, k, v, ptr); };
  auto reject_unknown = [&](std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : o.items()) {
      bool known = false;
      for (const char* key : keys) known = known || k == key;
      if (!known) throw InputError(child(ptr, k), "unknown option for fixture '" + name + "'");
    }
  };
  try {
    if (name == "arch2d") {
      reject_unknown({"elements", "span", "rise", "E", "nu", "Iy", "Iz", "A", "load"});
      fixtures::Arch2dOptions a;
      integ("elements", a.elements), num("span", a.span), num("rise", a.rise), num("E", a.E), num("nu", a.nu);
      num("Iy", a.Iy), num("Iz", a.Iz), num("A", a.A), num("load", a.load);
      return fixtures::arch2d(a);
    }
    if (name == "barrel") {
      reject_unknown({"nx", "ny", "lx", "ly", "rise", "E", "nu", "t", "load"});
      fixtures::BarrelOptions a;
      integ("nx", a.nx), integ("ny", a.ny), num("lx", a.lx), num("ly", a.ly), num("rise", a.rise);
      num("E", a.E), num("nu", a.nu), num("t", a.t), num("load", a.load);
      return fixtures::barrel(a);
    }
    if (name == "dome") {
      reject_unknown({"n", "span", "rise", "E", "nu", "t", "load", "supports", "loads"});
      fixtures::DomeOptions a;
      integ("n", a.n), num("span", a.span), num("rise", a.rise), num("E", a.E), num("nu", a.nu), num("t", a.t);
      num("load", a.load);
      a.supports = string_or(o, "supports", a.supports, ptr);
      a.loads = string_or(o, "loads", a.loads, ptr);
      return fixtures::dome(a);
    }
    if (name == "gridshell") {
      reject_unknown({"nx", "ny", "lx", "ly", "amplitude", "E", "nu", "depth", "width", "load"});
      fixtures::GridshellOptions a;
      integ("nx", a.nx), integ("ny", a.ny), num("lx", a.lx), num("ly", a.ly), num("amplitude", a.amplitude);
      num("E", a.E), num("nu", a.nu), num("depth", a.depth), num("width", a.width), num("load", a.load);
      return fixtures::gridshell(a);
    }
    if (name == "multispan") {
      reject_unknown({"spans", "elements_per_span", "span", "rise", "E", "nu", "Iy", "Iz", "A", "load"});
      fixtures::MultispanOptions a;
      integ("spans", a.spans), integ("elements_per_span", a.elements_per_span), num("span", a.span);
      num("rise", a.rise), num("E", a.E), num("nu", a.nu), num("Iy", a.Iy), num("Iz", a.Iz), num("A", a.A);
      num("load", a.load);
      return fixtures::multispan_arch(a);
    }
    if (name == "plate") {
      reject_unknown({"n", "a", "t", "E", "nu", "load"});
      fixtures::PlateOptions a;
      integ("n", a.n), num("a", a.a), num("t", a.t), num("E", a.E), num("nu", a.nu), num("load", a.load);
      return fixtures::ss_plate(a);
    }
  } catch (const InputError&) {
    throw;
  } catch (const Error& e) {
    throw InputError(ptr, e.what());
  }
  throw InputError(ptr, "unknown fixture '" + name + "'");
}

/// A model given inline, by file path, or as {"fixture": name, "options": {...}}.
inline StructuralModel model_from_reference(const json& j, const std::string& ptr, const std::string& base_dir) {
  using namespace detail;
  if (j.is_string()) {
    std::string path = j.get<std::string>();
    if (!path.empty() && path[0] != '/' && !base_dir.empty()) path = base_dir + "/" + path;
    try {
      return model_from_json(load_json(path));
    } catch (const InputError& e) {
      throw InputError(ptr, std::string("in '") + path + "': " + e.what());
    }
  }
  if (j.is_object() && j.contains("fixture")) {
    const json& name = j.at("fixture");
    if (!name.is_string()) throw InputError(child(ptr, "fixture"), "expected a fixture name");
    return fixture_from_json(name.get<std::string>(), j.value("options", json()), child(ptr, "options")).model;
  }
  try {
    return model_from_json(j);
  } catch (const InputError& e) {
    throw InputError(ptr + e.pointer(), e.what());
  }
}

// ---------------------------------------------------------------------------
// Parameter selections
// ---------------------------------------------------------------------------

/// One selection entry expanded into parameters, with its optimization
/// settings (ignored outside `optimize`).
struct ParameterGroupSpec {
  ParameterKind kind = ParameterKind::NodeCoord;
  std::vector<DesignParameter> params;
  std::string pointer;
  double filter_radius = 0.0;
  FilterMode filter_mode = FilterMode::Gradient;
  std::optional<ShapeBox> box;            ///< node_coord: normalized variables
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  std::optional<double> volume_fraction;  ///< density: Σp ≤ fraction · count
};

namespace detail {

inline std::vector<int> node_selection(const StructuralModel& m, const json& sel, const std::string& ptr) {
  std::vector<int> ids;
  if (sel.is_string()) {
    const std::string s = sel.get<std::string>();
    const auto sup = m.supported_nodes();
    if (s == "all" || s == "free") {
      for (const auto& n : m.nodes())
        if (s == "all" || !std::binary_search(sup.begin(), sup.end(), n.id)) ids.push_back(n.id);
      return ids;
    }
    throw InputError(ptr, "node selection must be \"all\", \"free\" or an array of ids");
  }
  array(sel, ptr);
  for (std::size_t i = 0; i < sel.size(); ++i) {
    const int id = integer(sel[i], child(ptr, i));
    if (!m.has_node(id)) throw InputError(child(ptr, i), "unknown node " + std::to_string(id));
    ids.push_back(id);
  }
  return ids;
}

inline std::vector<int> element_selection(const StructuralModel& m, const json& sel, const std::string& ptr,
                                          bool quads_only) {
  std::vector<int> ids;
  if (sel.is_string()) {
    const std::string s = sel.get<std::string>();
    if (s == "quads" || (s == "all" && quads_only)) {
      for (const auto& q : m.quads()) ids.push_back(q.id);
      return ids;
    }
    if (s == "beams") {
      for (const auto& b : m.beams()) ids.push_back(b.id);
      return ids;
    }
    if (s == "all") {
      for (const auto& b : m.beams()) ids.push_back(b.id);
      for (const auto& q : m.quads()) ids.push_back(q.id);
      return ids;
    }
    throw InputError(ptr, "element selection must be \"all\", \"quads\", \"beams\" or an array of ids");
  }
  array(sel, ptr);
  for (std::size_t i = 0; i < sel.size(); ++i) {
    const int id = integer(sel[i], child(ptr, i));
    if (!m.find_element(id)) throw InputError(child(ptr, i), "unknown element " + std::to_string(id));
    ids.push_back(id);
  }
  return ids;
}

}  // namespace detail

inline ParameterGroupSpec parameter_group_from_json(const StructuralModel& m, const json& j, const std::string& ptr) {
  using namespace detail;
  ParameterGroupSpec g;
  g.pointer = ptr;
  if (!j.is_object()) throw InputError(ptr, "expected an object");
  const std::string kind = string_or(j, "kind", "", ptr);
  g.filter_radius = number_or(j, "filter_radius", 0.0, ptr);
  if (g.filter_radius < 0.0) throw InputError(child(ptr, "filter_radius"), "must be nonnegative");
  const std::string mode = string_or(j, "filter", "gradient", ptr);
  if (mode == "gradient") g.filter_mode = FilterMode::Gradient;
  else if (mode == "variable") g.filter_mode = FilterMode::Variable;
  else throw InputError(child(ptr, "filter"), "must be \"gradient\" or \"variable\"");
  if (j.contains("bounds")) {
    const auto bnd = numbers<2>(j.at("bounds"), child(ptr, "bounds"));
    if (!(bnd[0] < bnd[1])) throw InputError(child(ptr, "bounds"), "lower bound must be below upper bound");
    g.lower = bnd[0], g.upper = bnd[1];
  }

  if (kind == "node_coord") {
    g.kind = ParameterKind::NodeCoord;
    const int axis = j.contains("axis") ? axis_from(j.at("axis"), child(ptr, "axis")) : 2;
    const json sel = j.contains("nodes") ? j.at("nodes") : (j.contains("node") ? json::array({j.at("node")}) : json("free"));
    for (int id : node_selection(m, sel, child(ptr, j.contains("nodes") ? "nodes" : "node"))) {
      const Node& n = m.node(id);
      g.params.push_back(DesignParameter::node_coord(id, axis, axis == 0 ? n.x : axis == 1 ? n.y : n.z));
    }
    if (j.contains("box")) {
      const auto b = numbers<2>(j.at("box"), child(ptr, "box"));
      g.box = ShapeBox{b[0], b[1]};
      try {
        g.box->validate();
      } catch (const Error& e) {
        throw InputError(child(ptr, "box"), e.what());
      }
    }
  } else if (kind == "thickness") {
    g.kind = ParameterKind::ShellThickness;
    const json sel = j.contains("elements") ? j.at("elements") : (j.contains("element") ? json::array({j.at("element")}) : json("quads"));
    const bool has_initial = j.contains("initial");
    const double initial = number_or(j, "initial", 0.0, ptr);
    for (int id : element_selection(m, sel, child(ptr, "elements"), true)) {
      const auto ref = *m.find_element(id);
      if (ref.kind != ElementKind::QuadShell)
        throw InputError(child(ptr, "elements"), "element " + std::to_string(id) + " is not a quad shell");
      g.params.push_back(DesignParameter::thickness(id, has_initial ? initial : m.quads()[ref.index].t));
    }
  } else if (kind == "density") {
    g.kind = ParameterKind::DensityRatio;
    const json sel = j.contains("elements") ? j.at("elements") : (j.contains("element") ? json::array({j.at("element")}) : json("all"));
    const double initial = number_or(j, "initial", 1.0, ptr);
    for (int id : element_selection(m, sel, child(ptr, "elements"), false))
      g.params.push_back(DesignParameter::density(id, initial));
    if (j.contains("volume_fraction")) {
      g.volume_fraction = number(j.at("volume_fraction"), child(ptr, "volume_fraction"));
      if (!(*g.volume_fraction > 0.0 && *g.volume_fraction <= 1.0))
        throw InputError(child(ptr, "volume_fraction"), "must lie in (0, 1]");
    }
  } else {
    throw InputError(child(ptr, "kind"), "must be \"node_coord\", \"thickness\" or \"density\"");
  }
  static const std::map<std::string, std::set<std::string>> kKeys = {
      {"node_coord", {"axis", "nodes", "node", "box"}},
      {"thickness", {"elements", "element", "initial"}},
      {"density", {"elements", "element", "initial", "volume_fraction"}},
  };
  for (const auto& [k, v] : j.items())
    if (k != "kind" && k != "filter_radius" && k != "filter" && k != "bounds" && !kKeys.at(kind).count(k))
      throw InputError(child(ptr, k), "unknown key for a " + kind + " parameter group");
  if (g.params.empty()) throw InputError(ptr, "selection is empty");
  return g;
}

inline SimpConfig simp_from_json(const json& j, const std::string& ptr) {
  SimpConfig s;
  if (j.is_null()) return s;
  s.P = detail::number_or(j, "P", s.P, ptr);
  s.p_min = detail::number_or(j, "p_min", s.p_min, ptr);
  try {
    s.validate();
  } catch (const Error& e) {
    throw InputError(ptr, e.what());
  }
  return s;
}

/// The `parameters` array of a parameter spec or scenario.
inline std::vector<ParameterGroupSpec> parameter_groups_from_json(const StructuralModel& m, const json& root) {
  const json& arr = detail::array(detail::field(root, "parameters", ""), "/parameters");
  if (arr.empty()) throw InputError("/parameters", "no parameters selected");
  std::vector<ParameterGroupSpec> out;
  for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(parameter_group_from_json(m, arr[i], detail::child("/parameters", i)));
  return out;
}

inline ParameterSet parameter_set_from_groups(const StructuralModel& m, const std::vector<ParameterGroupSpec>& groups,
                                              const SimpConfig& simp) {
  std::vector<DesignParameter> all;
  for (const auto& g : groups) all.insert(all.end(), g.params.begin(), g.params.end());
  try {
    return ParameterSet(m, std::move(all), simp);
  } catch (const ModelError& e) {
    throw InputError("/parameters", e.what());
  }
}

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

struct ObjectiveSpec {
  std::string kind = "strain_energy";
  SizeObjectiveConfig size;
  bool normalize = false;  ///< divide by the value at the first evaluation
};

inline ObjectiveSpec objective_from_json(const json& j, const std::string& ptr) {
  using namespace detail;
  ObjectiveSpec o;
  if (j.is_null()) return o;
  if (j.is_string()) {
    o.kind = j.get<std::string>();
  } else {
    o.kind = string_or(j, "kind", o.kind, ptr);
    o.size.eps1 = number_or(j, "eps1", o.size.eps1, ptr);
    o.size.kappa = number_or(j, "kappa", o.size.kappa, ptr);
    o.size.t_min = number_or(j, "t_min", o.size.t_min, ptr);
    o.size.u_max = number_or(j, "u_max", o.size.u_max, ptr);
    if (j.contains("component")) o.size.component = component_from(j.at("component"), child(ptr, "component"));
    o.normalize = boolean_or(j, "normalize", false, ptr);
  }
  if (o.kind != "strain_energy" && o.kind != "penalized_volume")
    throw InputError(j.is_string() ? ptr : child(ptr, "kind"), "must be \"strain_energy\" or \"penalized_volume\"");
  if (o.kind == "penalized_volume") {
    try {
      o.size.validate();
    } catch (const Error& e) {
      throw InputError(ptr, e.what());
    }
  }
  return o;
}

/// Divides an objective by its first evaluated value (fixed afterwards).
inline Objective normalized(Objective g, std::shared_ptr<double> scale) {
  return [g = std::move(g), scale](const ObjectiveContext& c) {
    ObjectiveEval e = g(c);
    if (*scale == 0.0) *scale = e.value != 0.0 ? std::abs(e.value) : 1.0;
    e.value /= *scale;
    e.dg_du /= *scale;
    if (e.dg_dp.size()) e.dg_dp /= *scale;
    return e;
  };
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

struct Scenario {
  StructuralModel model;
  std::vector<ParameterGroupSpec> groups;
  SimpConfig simp;
  ObjectiveSpec objective;
  OptimizerConfig optimizer;
  long max_iter = 100;
  long snapshot_every = 0;
  SolverChoice solver;
};

inline SolverChoice solver_from_json(const json& j, const std::string& ptr) {
  SolverChoice c;
  if (j.is_null()) return c;
  if (!j.is_string()) throw InputError(ptr, "expected \"dense\" or \"sparse\"");
  try {
    c.kind = parse_solver_kind(j.get<std::string>());
  } catch (const Error& e) {
    throw InputError(ptr, e.what());
  }
  return c;
}

inline Scenario scenario_from_json(const json& j, const std::string& base_dir) {
  using namespace detail;
  if (!j.is_object()) throw InputError("", "scenario must be an object");
  Scenario s;
  s.model = model_from_reference(field(j, "model", ""), "/model", base_dir);
  s.simp = simp_from_json(j.value("simp", json()), "/simp");
  if (j.contains("parameters")) s.groups = parameter_groups_from_json(s.model, j);
  s.objective = objective_from_json(j.value("objective", json()), "/objective");
  s.solver = solver_from_json(j.value("solver", json()), "/solver");
  s.max_iter = integer_or(j, "max_iter", 100, "");
  if (s.max_iter < 0) throw InputError("/max_iter", "must be nonnegative");
  s.snapshot_every = integer_or(j, "snapshot_every", 0, "");
  if (s.snapshot_every < 0) throw InputError("/snapshot_every", "must be nonnegative");
  const json opt = j.value("optimizer", json::object());
  const std::string op = "/optimizer";
  const std::string kind = string_or(opt, "kind", "gd", op);
  if (kind == "gd") s.optimizer.kind = OptimizerKind::GradientDescent;
  else if (kind == "adam") s.optimizer.kind = OptimizerKind::Adam;
  else if (kind == "mma") s.optimizer.kind = OptimizerKind::Mma;
  else throw InputError(child(op, "kind"), "must be \"gd\", \"adam\" or \"mma\"");
  s.optimizer.step = number_or(opt, "step", s.optimizer.step, op);
  if (!(s.optimizer.step >= 0.0)) throw InputError(child(op, "step"), "must be nonnegative");
  s.optimizer.adam.beta1 = number_or(opt, "beta1", s.optimizer.adam.beta1, op);
  s.optimizer.adam.beta2 = number_or(opt, "beta2", s.optimizer.adam.beta2, op);
  s.optimizer.mma.move = number_or(opt, "move", s.optimizer.mma.move, op);
  s.optimizer.mma.asy_init = number_or(opt, "asy_init", s.optimizer.mma.asy_init, op);
  for (const auto& g : s.groups)
    if (g.volume_fraction && s.optimizer.kind != OptimizerKind::Mma)
      throw InputError(child(g.pointer, "volume_fraction"), "volume constraints require the mma optimizer");
  return s;
}

/// Variable groups for run_optimization plus the initial design.
struct ProblemLayout {
  std::vector<VariableGroup> groups;
  VectorXd x0;
};

inline ProblemLayout layout_groups(const StructuralModel& m, const std::vector<ParameterGroupSpec>& specs,
                                   const SimpConfig& simp) {
  ProblemLayout out;
  std::size_t first = 0;
  std::vector<double> x0;
  for (std::size_t gi = 0; gi < specs.size(); ++gi) {
    const auto& s = specs[gi];
    VariableGroup g;
    g.name = s.pointer;
    g.first = first;
    g.count = s.params.size();
    g.mode = s.filter_mode;
    const Index n = static_cast<Index>(g.count);
    double lo = s.lower, hi = s.upper;
    if (s.kind == ParameterKind::NodeCoord && s.box) {
      g.offset = s.box->z_min;
      g.scale = s.box->span();
      lo = std::max(lo, 0.0), hi = std::min(hi, 1.0);
    } else if (s.kind == ParameterKind::DensityRatio) {
      lo = std::max(lo, simp.p_min), hi = std::min(hi, 1.0);
    } else if (s.kind == ParameterKind::ShellThickness) {
      lo = std::max(lo, 1e-12 * (std::isfinite(hi) ? std::max(1.0, hi) : 1.0));
    }
    g.lb = VectorXd::Constant(n, lo);
    g.ub = VectorXd::Constant(n, hi);
    if (s.filter_radius > 0.0) {
      std::vector<int> ids;
      for (const auto& p : s.params) ids.push_back(p.entity);
      g.filter = s.kind == ParameterKind::NodeCoord ? HatFilter(node_positions(m, ids), s.filter_radius)
                                                     : HatFilter(element_centroids(m, ids), s.filter_radius);
    }
    if (s.volume_fraction) g.volume_budget = *s.volume_fraction * static_cast<double>(g.count);
    for (const auto& p : s.params) x0.push_back((p.value - g.offset) / g.scale);
    out.groups.push_back(std::move(g));
    first += static_cast<std::size_t>(n);
  }
  out.x0 = Eigen::Map<const VectorXd>(x0.data(), static_cast<Index>(x0.size()));
  return out;
}

// ---------------------------------------------------------------------------
// Neural scenarios
// ---------------------------------------------------------------------------

inline NnConfig nn_config_from_json(const json& j, std::size_t quad_count, const std::string& ptr) {
  using namespace detail;
  NnConfig c;
  if (j.is_null()) {
    c.V_star = 0.5 * static_cast<double>(quad_count);
    return c;
  }
  if (!j.is_object()) throw InputError(ptr, "expected an object");
  if (j.contains("widths")) {
    const json& w = array(j.at("widths"), child(ptr, "widths"));
    c.widths.clear();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const int v = integer(w[i], child(child(ptr, "widths"), i));
      if (v <= 0) throw InputError(child(child(ptr, "widths"), i), "layer width must be positive");
      c.widths.push_back(v);
    }
  }
  const std::string squash = string_or(j, "squash", "sigmoid", ptr);
  if (squash == "sigmoid") c.squash = OutputSquash::Sigmoid;
  else if (squash == "softmax") c.squash = OutputSquash::Softmax;
  else throw InputError(child(ptr, "squash"), "must be \"sigmoid\" or \"softmax\"");
  c.lr = number_or(j, "lr", c.lr, ptr);
  c.epochs = integer_or(j, "epochs", c.epochs, ptr);
  if (c.epochs < 0) throw InputError(child(ptr, "epochs"), "must be nonnegative");
  c.alpha2_start = number_or(j, "alpha2_start", c.alpha2_start, ptr);
  c.alpha2_step = number_or(j, "alpha2_step", c.alpha2_step, ptr);
  c.P_start = number_or(j, "P_start", c.P_start, ptr);
  c.P_step = number_or(j, "P_step", c.P_step, ptr);
  c.P_cap = number_or(j, "P_cap", c.P_cap, ptr);
  if (j.contains("V_star")) c.V_star = number(j.at("V_star"), child(ptr, "V_star"));
  else c.V_star = number_or(j, "volume_fraction", 0.5, ptr) * static_cast<double>(quad_count);
  const int seed = integer_or(j, "seed", 0, ptr);
  if (seed < 0) throw InputError(child(ptr, "seed"), "must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.p_min = number_or(j, "p_min", c.p_min, ptr);
  c.box.z_min = number_or(j, "z_min", c.box.z_min, ptr);
  c.box.z_max = number_or(j, "z_max", c.box.z_max, ptr);
  c.shape_radius = number_or(j, "shape_radius", c.shape_radius, ptr);
  c.density_radius = number_or(j, "density_radius", c.density_radius, ptr);
  c.design_supports = boolean_or(j, "design_supports", c.design_supports, ptr);
  if (!(c.lr >= 0.0)) throw InputError(child(ptr, "lr"), "must be nonnegative");
  if (!(c.P_start >= 1.0) || c.P_step < 0.0 || c.P_cap < c.P_start)
    throw InputError(ptr, "P schedule must start at >= 1, step >= 0 and cap >= start");
  if (c.alpha2_step < 0.0) throw InputError(child(ptr, "alpha2_step"), "schedule must be monotone");
  return c;
}

inline json mlp_params_to_json(const Mlp& mlp, const VectorXd& theta, OutputSquash squash) {
  return {{"widths", mlp.widths()},
          {"hidden_activation", "relu"},
          {"output", squash == OutputSquash::Sigmoid ? "sigmoid" : "softmax"},
          {"layout", "per layer: W (out x in, column-major) then b"},
          {"count", theta.size()},
          {"theta", std::vector<double>(theta.data(), theta.data() + theta.size())}};
}

// ---------------------------------------------------------------------------
// Result files
// ---------------------------------------------------------------------------

/// node,ux,uy,uz,rx,ry,rz per node in id order.
inline std::string displacements_csv(const StructuralModel& m, const VectorXd& u) {
  std::string s = "node,ux,uy,uz,rx,ry,rz\n";
  for (std::size_t i = 0; i < m.nodes().size(); ++i) {
    s += std::to_string(m.nodes()[i].id);
    for (int c = 0; c < kDofPerNode; ++c) s += "," + fmt(u(static_cast<Index>(i) * kDofPerNode + c));
    s += "\n";
  }
  return s;
}

/// node,component,reaction per constrained DOF.
inline std::string reactions_csv(const StructuralModel& m, const VectorXd& r) {
  std::string s = "node,component,reaction\n";
  const auto dofs = m.constrained_dofs();
  for (std::size_t k = 0; k < dofs.size(); ++k) {
    const auto i = static_cast<std::size_t>(dofs[k] / kDofPerNode);
    s += std::to_string(m.nodes()[i].id) + "," + component_name(static_cast<int>(dofs[k] % kDofPerNode)) + "," +
         fmt(r(static_cast<Index>(k))) + "\n";
  }
  return s;
}

}  // namespace sso::io
