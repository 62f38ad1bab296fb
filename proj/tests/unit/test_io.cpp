#include "sso/io.hpp"
#include "support.hpp"

using namespace sso;
using io::json;

namespace {

json spring_json() {
  return json::parse(R"({
    "sso_model": 1,
    "nodes": [{"id": 0, "x": 0, "y": 0, "z": 0}, {"id": 1, "x": 1, "y": 0, "z": 0}],
    "beamcols": [{"id": 1, "i_node": 0, "j_node": 1, "E": 2, "G": 1, "Iy": 1, "Iz": 1, "J": 1, "A": 1}],
    "supports": [{"node": 0, "mask": [1, 1, 1, 1, 1, 1]},
                 {"node": 1, "mask": [false, true, true, true, true, true]}],
    "loads": [{"node": 1, "components": [4, 0, 0, 0, 0, 0]}]
  })");
}

std::string pointer_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const InputError& e) {
    return e.pointer();
  }
  return "<no error>";
}

}  // namespace

TEST(ModelJson, ParsesAndSolves) {
  const auto m = io::model_from_json(spring_json());
  EXPECT_EQ(m.dof(), 12);
  EXPECT_EQ(m.dof_bc(), 11);
  EXPECT_NEAR(solve(assemble(m)).u(0 + 6), 2.0, 1e-12);
}

TEST(ModelJson, RoundTripIsLossless) {
  for (const auto& m : {test::random_mixed(3), fixtures::arch2d({.elements = 10}).model}) {
    const json j = io::model_to_json(m);
    const auto back = io::model_from_json(j);
    EXPECT_EQ(io::model_to_json(back), j);
    const auto a = solve(assemble(m)), b = solve(assemble(back));
    EXPECT_EQ(a.u, b.u);
  }
}

TEST(ModelJson, ErrorsCarryPointers) {
  auto bad = spring_json();
  bad["nodes"][1]["x"] = "one";
  EXPECT_EQ(pointer_of([&] { io::model_from_json(bad); }), "/nodes/1/x");

  bad = spring_json();
  bad["beamcols"][0]["A"] = -1.0;
  EXPECT_EQ(pointer_of([&] { io::model_from_json(bad); }), "/beamcols/0");

  bad = spring_json();
  bad["supports"][1]["mask"][2] = 2;
  EXPECT_EQ(pointer_of([&] { io::model_from_json(bad); }), "/supports/1/mask/2");

  bad = spring_json();
  bad["loads"][0].erase("components");
  EXPECT_EQ(pointer_of([&] { io::model_from_json(bad); }), "/loads/0/components");

  bad = spring_json();
  bad["sso_model"] = 2;
  EXPECT_EQ(pointer_of([&] { io::model_from_json(bad); }), "/sso_model");
}

TEST(ModelJson, MalformedTextRejected) {
  EXPECT_THROW(io::parse_json("{\"nodes\": [", "inline"), InputError);
}

TEST(Fixtures, NamedGeneratorsAndOptions) {
  for (const auto& name : io::fixture_names()) {
    json opt = json::object();
    if (name == "multispan") opt = {{"spans", 3}};
    EXPECT_NO_THROW(io::fixture_from_json(name, opt)) << name;
  }
  EXPECT_EQ(io::fixture_from_json("dome", {{"n", 4}}).model.quads().size(), 16u);
  EXPECT_THROW(io::fixture_from_json("dome", {{"colour", 1}}), InputError);
  EXPECT_THROW(io::fixture_from_json("dome", {{"n", 3}}), InputError);
  EXPECT_THROW(io::fixture_from_json("tower", json::object()), InputError);
}

TEST(Fixtures, MultispanDofCount) {
  EXPECT_EQ(fixtures::multispan_arch({}).model.dof(), 1206);
  fixtures::MultispanOptions o;
  o.elements_per_span = 80;
  EXPECT_EQ(fixtures::multispan_arch(o).model.dof(), 48006);
}

TEST(Parameters, Selections) {
  const auto m = fixtures::dome({.n = 4}).model;
  const json spec = json::parse(R"({"parameters": [
      {"kind": "node_coord", "nodes": "free", "axis": "z", "box": [0, 3]},
      {"kind": "thickness", "elements": [1, 2]},
      {"kind": "density", "initial": 0.5, "volume_fraction": 0.4}
  ]})");
  const auto groups = io::parameter_groups_from_json(m, spec);
  ASSERT_EQ(groups.size(), 3u);
  EXPECT_EQ(groups[0].params.size(), 25u - 4u);
  EXPECT_EQ(groups[1].params.size(), 2u);
  EXPECT_EQ(groups[2].params.size(), 16u);
  const SimpConfig simp{3.0, 0.01};
  const auto layout = io::layout_groups(m, groups, simp);
  EXPECT_DOUBLE_EQ(*layout.groups[2].volume_budget, 0.4 * 16);
  EXPECT_DOUBLE_EQ(layout.groups[0].scale, 3.0);
  // Variables map back to the physical parameters.
  OptimizationProblem prob{io::parameter_set_from_groups(m, groups, simp), strain_energy_objective(), layout.groups, {}, {}, {}};
  EXPECT_LE((map_variables(prob, layout.x0) - prob.params.values()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Parameters, ErrorsCarryPointers) {
  const auto m = fixtures::dome({.n = 4}).model;
  auto parse = [&](const char* text) { return [&m, text] { io::parameter_groups_from_json(m, json::parse(text)); }; };
  EXPECT_EQ(pointer_of(parse(R"({"parameters": [{"kind": "mass"}]})")), "/parameters/0/kind");
  EXPECT_EQ(pointer_of(parse(R"({"parameters": [{"kind": "node_coord", "nodes": [0, 999]}]})")), "/parameters/0/nodes/1");
  EXPECT_EQ(pointer_of(parse(R"({"parameters": [{"kind": "node_coord", "axis": "w"}]})")), "/parameters/0/axis");
  EXPECT_EQ(pointer_of(parse(R"({"parameters": [{"kind": "density", "volume_fraction": 1.5}]})")),
            "/parameters/0/volume_fraction");
  EXPECT_EQ(pointer_of(parse(R"({"parameters": []})")), "/parameters");
  EXPECT_EQ(pointer_of(parse(R"({"parameters": [{"kind": "thickness", "lower": 0.1}]})")), "/parameters/0/lower");
  EXPECT_EQ(pointer_of(parse(R"({"parameters": [{"kind": "density", "box": [0, 1]}]})")), "/parameters/0/box");
}

TEST(Parameters, UnboundedThicknessHasFinitePositiveFloor) {
  const auto m = fixtures::dome({.n = 4}).model;
  const auto groups = io::parameter_groups_from_json(m, json::parse(R"({"parameters": [{"kind": "thickness"}]})"));
  const auto layout = io::layout_groups(m, groups, {});
  ASSERT_EQ(layout.groups.size(), 1u);
  EXPECT_GT(layout.groups[0].lb.minCoeff(), 0.0);
  EXPECT_TRUE(layout.groups[0].lb.allFinite());
  EXPECT_TRUE(std::isinf(layout.groups[0].ub.maxCoeff()));
  EXPECT_TRUE((layout.x0.array() >= layout.groups[0].lb.array()).all());
}

TEST(Scenario, ParsesOptimizerAndObjective) {
  const json j = json::parse(R"({
    "model": {"fixture": "dome", "options": {"n": 4}},
    "parameters": [{"kind": "thickness"}],
    "objective": {"kind": "penalized_volume", "u_max": 0.01, "t_min": 0.05},
    "optimizer": {"kind": "adam", "step": 0.01},
    "max_iter": 7
  })");
  const auto s = io::scenario_from_json(j, "");
  EXPECT_EQ(s.optimizer.kind, OptimizerKind::Adam);
  EXPECT_EQ(s.max_iter, 7);
  EXPECT_EQ(s.objective.kind, "penalized_volume");
  EXPECT_DOUBLE_EQ(s.objective.size.u_max, 0.01);
}

TEST(Scenario, VolumeFractionNeedsMma) {
  const json j = json::parse(R"({
    "model": {"fixture": "dome", "options": {"n": 4}},
    "parameters": [{"kind": "density", "volume_fraction": 0.5}],
    "optimizer": {"kind": "gd"}
  })");
  EXPECT_EQ(pointer_of([&] { io::scenario_from_json(j, ""); }), "/parameters/0/volume_fraction");
}

TEST(Neural, ConfigDefaultsAndOverrides) {
  const NnConfig d = io::nn_config_from_json(json(), 64, "/nn");
  EXPECT_DOUBLE_EQ(d.V_star, 32.0);
  const NnConfig c = io::nn_config_from_json(json::parse(R"({"epochs": 5, "volume_fraction": 0.25, "seed": 4})"), 64, "/nn");
  EXPECT_EQ(c.epochs, 5);
  EXPECT_DOUBLE_EQ(c.V_star, 16.0);
  EXPECT_EQ(c.seed, 4u);
  EXPECT_THROW(io::nn_config_from_json(json::parse(R"({"squash": "tanh"})"), 64, "/nn"), InputError);
}

TEST(Neural, ParameterFileLayout) {
  const Mlp mlp({1, 40, 40, 40, 2});
  const json j = io::mlp_params_to_json(mlp, mlp.init(0), OutputSquash::Sigmoid);
  EXPECT_EQ(j["count"], 3442);
  EXPECT_EQ(j["theta"].size(), 3442u);
}

TEST(Format, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678, 0.0}) EXPECT_EQ(std::strtod(io::fmt(v).c_str(), nullptr), v);
  EXPECT_EQ(io::fmt(0.1), "0.1");
}

TEST(Csv, DisplacementsAndReactions) {
  const auto m = io::model_from_json(spring_json());
  const auto s = solve(assemble(m));
  const std::string u = io::displacements_csv(m, s.u);
  EXPECT_EQ(u.substr(0, u.find('\n')), "node,ux,uy,uz,rx,ry,rz");
  EXPECT_NE(u.find("\n1,2,0,0,0,0,0\n"), std::string::npos);
  const std::string r = io::reactions_csv(m, reactions(s));
  EXPECT_NE(r.find("0,UX,-4"), std::string::npos);
}
