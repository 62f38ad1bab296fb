#include "support.hpp"

using namespace sso;

namespace {

ModelBuilder one_beam() {
  ModelBuilder b;
  b.add_node(0, 0, 0, 0).add_node(1, 1, 0, 0);
  b.add_beamcol({1, 0, 1, 1, 1, 1, 1, 1, 1});
  return b;
}

}  // namespace

TEST(Model, SingleNodeHasSixDof) {
  ModelBuilder b;
  b.add_node(0, 0, 0, 0).add_support(0, fixtures::kFixed);
  const auto m = b.finalize();
  EXPECT_EQ(m.dof(), 6);
}

TEST(Model, DofIsSixTimesNodeCount) {
  ModelBuilder b;
  for (int i = 0; i < 510; ++i) b.add_node(i, i, 0, 0);
  b.add_support(0, fixtures::kFixed);
  EXPECT_EQ(b.finalize().dof(), 3060);
}

TEST(Model, DuplicateNodeIdRejectedWithId) {
  ModelBuilder b;
  b.add_node(0, 0, 0, 0);
  try {
    b.add_node(0, 1, 0, 0);
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find('0'), std::string::npos);
  }
}

TEST(Model, NonFiniteCoordinateRejected) {
  ModelBuilder b;
  EXPECT_THROW(b.add_node(0, std::nan(""), 0, 0), ModelError);
}

TEST(Model, SupportMaskCounts) {
  auto b = one_beam();
  b.add_support(0, fixtures::kFixed);
  EXPECT_EQ(b.finalize().dof_bc(), 6);
  auto c = one_beam();
  c.add_support(0, {true, true, true, true, false, true});
  const auto m = c.finalize();
  EXPECT_EQ(m.dof_bc(), 5);
  for (Index d : m.constrained_dofs()) EXPECT_NE(d, 4);
}

TEST(Model, EmptySupportMaskRejected) {
  auto b = one_beam();
  EXPECT_THROW(b.add_support(0, {}), ModelError);
}

TEST(Model, SupportOnMissingNodeRejected) {
  auto b = one_beam();
  EXPECT_THROW(b.add_support(7, fixtures::kFixed), ModelError);
}

TEST(Model, LoadsAccumulate) {
  auto b = one_beam();
  b.add_support(0, fixtures::kFixed);
  b.add_nodal_load(1, {0, 0, -250, 0, 0, 0}).add_nodal_load(1, {0, 0, -250, 0, 0, 0});
  const auto m = b.finalize();
  const VectorXd f = assemble_load(m);
  EXPECT_DOUBLE_EQ(f(m.dof_index(1, 2)), -500.0);
}

TEST(Model, LoadOnMissingNodeRejected) {
  auto b = one_beam();
  EXPECT_THROW(b.add_nodal_load(9, {0, 0, 1, 0, 0, 0}), ModelError);
}

TEST(Model, ArchLoadTableSum) {
  const auto f = fixtures::arch2d();
  EXPECT_NEAR(assemble_load(f.model).lpNorm<1>(), 49500.0, 1e-9);
}

TEST(Model, BeamWithCoincidentEndsRejected) {
  ModelBuilder b;
  b.add_node(0, 0, 0, 0);
  EXPECT_THROW(b.add_beamcol({1, 0, 0, 1, 1, 1, 1, 1, 1}), ModelError);
}

TEST(Model, BeamFieldValidationNamesField) {
  ModelBuilder b;
  b.add_node(0, 0, 0, 0).add_node(1, 1, 0, 0);
  try {
    b.add_beamcol({1, 0, 1, 1, 1, 1, 1, 1, -1});
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("A"), std::string::npos);
  }
}

TEST(Model, QuadValidation) {
  ModelBuilder b;
  b.add_node(0, 0, 0, 0).add_node(1, 1, 0, 0).add_node(2, 1, 1, 0).add_node(3, 0, 1, 0);
  EXPECT_NO_THROW(b.add_quad({1, {0, 1, 2, 3}, 0.25, 1.99e8, 0.2, 1, 1}));
  EXPECT_THROW(b.add_quad({2, {0, 1, 2, 3}, 0.25, 1.99e8, 0.5, 1, 1}), ModelError);
  EXPECT_THROW(b.add_quad({3, {0, 1, 2, 2}, 0.25, 1.99e8, 0.2, 1, 1}), ModelError);
  EXPECT_THROW(b.add_quad({4, {0, 1, 2, 3}, 0.0, 1.99e8, 0.2, 1, 1}), ModelError);
  EXPECT_THROW(b.add_quad({5, {0, 1, 2, 3}, 0.1, 1.99e8, 0.2, 0.0, 1}), ModelError);
  EXPECT_THROW(b.add_quad({1, {0, 1, 2, 3}, 0.1, 1.99e8, 0.2, 1, 1}), ModelError);  // id clash
}

TEST(Model, DegenerateQuadRejected) {
  ModelBuilder b;
  b.add_node(0, 0, 0, 0).add_node(1, 1, 0, 0).add_node(2, 2, 0, 0).add_node(3, 3, 0, 0);
  EXPECT_THROW(b.add_quad({1, {0, 1, 2, 3}, 0.1, 1e7, 0.3, 1, 1}), ModelError);
}

TEST(Model, FinalizeCounts) {
  auto b = one_beam();
  b.add_support(0, fixtures::kFixed).add_support(1, fixtures::kFixed);
  const auto m = b.finalize();
  EXPECT_EQ(m.dof(), 12);
  EXPECT_EQ(m.dof_bc(), 12);
}

TEST(Model, BarrelCounts) {
  const auto m = fixtures::barrel().model;
  EXPECT_EQ(m.nodes().size(), 441u);
  EXPECT_EQ(m.quads().size(), 400u);
  EXPECT_EQ(m.dof(), 2646);
}

TEST(Model, NoSupportsRejected) {
  EXPECT_THROW(one_beam().finalize(), ModelError);
}

TEST(Model, SortedNodeOrderDefinesDofs) {
  ModelBuilder b;
  b.add_node(10, 0, 0, 0).add_node(3, 1, 0, 0);
  b.add_beamcol({1, 10, 3, 1, 1, 1, 1, 1, 1});
  b.add_support(10, fixtures::kFixed);
  const auto m = b.finalize();
  EXPECT_EQ(m.dof_index(3, 0), 0);
  EXPECT_EQ(m.dof_index(10, 2), 8);
}

TEST(Model, WithEditsLeavesOriginalUntouched) {
  const auto m = fixtures::dome({.n = 4}).model;
  const auto edited = m.with_edits([](StructuralModel::Data& d) { d.nodes[0].z += 1.0; });
  EXPECT_DOUBLE_EQ(edited.nodes()[0].z, m.nodes()[0].z + 1.0);
}
