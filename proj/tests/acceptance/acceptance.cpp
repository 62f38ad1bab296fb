// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.

#include "models.hpp"
#include "oracles/frame_stiffness_oracle.hpp"
#include "sso/io.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <sstream>

using namespace sso;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kCantileverTol = 1e-9;
constexpr double kOracleTol = 1e-10;
constexpr double kPlateTol = 0.03;
constexpr int kPlateSeriesTerms = 400;  // odd terms per direction
constexpr double kBarrelTol = 0.02;
constexpr double kBarrelSE = 1229.7;
constexpr double kBarrelUz = 0.025;
constexpr double kBarrelDz = -1212.6236;
constexpr double kBarrelDzTol = 0.05;
constexpr double kAdjointTol = 1e-5;
constexpr double kAdjointFloor = 1e-12;
constexpr double kFdStep = 1e-4;  // five-point central stencil
constexpr int kAdjointModels = 24;
constexpr int kAdjointMaxDof = 200;
constexpr double kShapeReduction = 0.90;
constexpr long kShapeIterations = 150;
constexpr double kCapBand = 0.05;
constexpr double kBudgetSlack = 1.001;
constexpr double kSolidDensity = 0.5;
constexpr double kNnGradTol = 1e-4;
constexpr double kNnFdStep = 1e-3;  // smaller steps lose digits to the thin-shell conditioning
constexpr double kNnReduction = 0.80;
constexpr double kScalingExponent = 1.5;
constexpr double kDenseThresholdDof = 20000;
constexpr int kDeterminismRuns = 3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  double budget_s;
  std::function<Outcome()> run;
};

double rel_diff(double a, double b, double floor = 0.0) {
  const double m = std::max({std::abs(a), std::abs(b), floor});
  return m == 0.0 ? 0.0 : std::abs(a - b) / m;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SSO_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("sso_acceptance_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::vector<int> free_nodes(const StructuralModel& m) {
  const auto sup = m.supported_nodes();
  std::vector<int> ids;
  for (const auto& n : m.nodes())
    if (!std::binary_search(sup.begin(), sup.end(), n.id)) ids.push_back(n.id);
  return ids;
}

std::vector<DesignParameter> z_params(const StructuralModel& m, const std::vector<int>& ids) {
  std::vector<DesignParameter> ps;
  for (int id : ids) ps.push_back(DesignParameter::node_coord(id, 2, m.node(id).z));
  return ps;
}

// 1. Element exactness.
Outcome element_exactness() {
  const double L = 2.5, E = 2.1e8, Iz = 3.3e-5, P = 12.0;
  ModelBuilder b;
  b.add_node(0, 0, 0, 0).add_node(1, L, 0, 0);
  b.add_beamcol({1, 0, 1, E, E / 2.6, 2.0 * Iz, Iz, 3.0 * Iz, 1e-2});
  b.add_support(0, fixtures::kFixed);
  b.add_nodal_load(1, {0, -P, 0, 0, 0, 0});
  const auto m = b.finalize();
  const auto s = solve(assemble(m));
  const double tip = rel_diff(s.u(m.dof_index(1, 1)), -P * L * L * L / (3 * E * Iz));

  double worst = 0.0, worst_zero = 0.0;
  for (const auto* c : {&oracle::k_oblique, &oracle::k_vertical}) {
    const Vec3 xi(c->xi[0], c->xi[1], c->xi[2]), xj(c->xj[0], c->xj[1], c->xj[2]);
    const Eigen::MatrixXd K = beam_global_stiffness<double>({c->E, c->G, c->Iy, c->Iz, c->J, c->A}, xi, xj);
    const Eigen::Map<const Eigen::Matrix<double, 12, 12, Eigen::RowMajor>> R(c->k.data());
    // Relative error is undefined at exact zeros of the oracle; those entries
    // are measured against the largest entry instead.
    const double scale = R.cwiseAbs().maxCoeff();
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j) {
        if (R(i, j) != 0.0)
          worst = std::max(worst, std::abs(K(i, j) - R(i, j)) / std::abs(R(i, j)));
        else
          worst_zero = std::max(worst_zero, std::abs(K(i, j)) / scale);
      }
  }
  return {tip <= kCantileverTol && worst <= kOracleTol && worst_zero <= kOracleTol,
          "tip rel err " + num(tip) + ", oracle nonzero entries max rel err " + num(worst) +
              ", zero entries max |K|/max|K| " + num(worst_zero)};
}

// 2. Plate convergence against the Navier double series.
Outcome shell_convergence() {
  fixtures::PlateOptions o;
  o.n = 32;
  const auto f = fixtures::ss_plate(o);
  const auto s = solve(assemble(f.model), {}, &f.model);
  const double w = std::abs(s.u(f.model.dof_index(f.marks.at("center"), 2)));
  const double D = o.E * o.t * o.t * o.t / (12.0 * (1.0 - o.nu * o.nu));
  double sum = 0.0;
  for (int i = 0; i < kPlateSeriesTerms; ++i)
    for (int j = 0; j < kPlateSeriesTerms; ++j) {
      const double m = 2 * i + 1, n = 2 * j + 1;
      sum += 1.0 / ((m * m + n * n) * (m * m + n * n));
    }
  const double w_ref = 4.0 * o.load * o.a * o.a / (std::pow(M_PI, 4) * D) * sum;
  const double err = rel_diff(w, w_ref);
  return {err <= kPlateTol, "center deflection " + num(w) + " vs series " + num(w_ref) + " (rel err " + num(err) + ")"};
}

// 3. Barrel vault reference values.
Outcome barrel_validation() {
  const auto f = fixtures::barrel();
  const auto sys = assemble(f.model);
  const auto s = solve(sys, {}, &f.model);
  const double se = strain_energy(sys.f_aug.head(sys.dof), s.u);
  const double uz = max_abs_component(s.u, 2);
  const double e1 = rel_diff(se, kBarrelSE), e2 = rel_diff(uz, kBarrelUz);
  return {e1 <= kBarrelTol && e2 <= kBarrelTol, "strain energy " + num(se) + " vs " + num(kBarrelSE) + " (rel err " +
                                                     num(e1) + "), max |uz| " + num(uz) + " vs " + num(kBarrelUz) +
                                                     " (rel err " + num(e2) + ")"};
}

// 4. Adjoint gradients against central differences.
Outcome adjoint_correctness() {
  int models = 0, checked = 0, failed = 0, max_dof = 0;
  double worst = 0.0;
  std::set<ParameterKind> kinds;
  std::set<std::string> objectives;
  for (int seed = 0; seed < kAdjointModels; ++seed) {
    const int family = seed % 3;
    const StructuralModel m = family == 0   ? test::random_frame(static_cast<std::uint64_t>(seed))
                              : family == 1 ? test::random_shell(static_cast<std::uint64_t>(seed))
                                            : test::random_mixed(static_cast<std::uint64_t>(seed));
    max_dof = std::max(max_dof, static_cast<int>(m.dof()));
    std::vector<DesignParameter> ps;
    for (const auto& n : m.nodes()) ps.push_back(DesignParameter::node_coord(n.id, 2, n.z));
    for (std::size_t i = 0; i < m.nodes().size(); i += 3) {
      const auto& n = m.nodes()[i];
      ps.push_back(DesignParameter::node_coord(n.id, seed % 2 ? 0 : 1, seed % 2 ? n.x : n.y));
    }
    for (const auto& q : m.quads()) ps.push_back(DesignParameter::thickness(q.id, q.t));
    for (const auto& bm : m.beams()) ps.push_back(DesignParameter::density(bm.id, 0.9));
    for (std::size_t i = 0; i < m.quads().size(); i += 2) ps.push_back(DesignParameter::density(m.quads()[i].id, 0.8));
    const ParameterSet set(m, ps, SimpConfig{3.0, 0.01});

    Objective g = strain_energy_objective();
    std::shared_ptr<SizeObjective> size;
    if (family != 0 && seed % 2) {
      const auto base = solve(assemble(set.realize(set.values())));
      // Each limit sits in the widest relative gap between neighbouring model
      // values above the given fraction, so no max(0, .) kink lies inside the
      // difference stencil.
      auto midgap = [](std::vector<double> v, double frac) {
        std::sort(v.begin(), v.end());
        std::size_t best = v.size() - 2;
        for (auto i = static_cast<std::size_t>(frac * static_cast<double>(v.size() - 1)); i + 1 < v.size(); ++i)
          if (v[i] > 0.0 && v[i + 1] / v[i] > v[best + 1] / v[best]) best = i;
        return std::sqrt(v[best] * v[best + 1]);
      };
      std::vector<double> uz, ts;
      for (const auto& n : m.nodes()) uz.push_back(std::abs(base.u(m.dof_index(n.id, 2))));
      for (const auto& q : m.quads()) ts.push_back(q.t);
      SizeObjectiveConfig sc;
      sc.u_max = midgap(uz, 0.5);
      sc.t_min = midgap(ts, 0.0);
      size = std::make_shared<SizeObjective>(sc);
      g = size->objective();
      objectives.insert("size");
    } else {
      objectives.insert("strain_energy");
    }
    for (const auto& p : ps) kinds.insert(p.kind);

    const VectorXd p = set.values();
    const auto r = sensitivity(set, p, g);
    const VectorXd fd = fd_gradient(set, p, g, kFdStep, {}, 4);
    const double scale = std::max(r.gradient.cwiseAbs().maxCoeff(), fd.cwiseAbs().maxCoeff());
    for (Index k = 0; k < p.size(); ++k) {
      if (std::max(std::abs(r.gradient(k)), std::abs(fd(k))) <= kAdjointFloor * scale) continue;
      const double e = rel_diff(r.gradient(k), fd(k));
      ++checked;
      worst = std::max(worst, e);
      if (e > kAdjointTol) {
        ++failed;
        if (std::getenv("SSO_ACCEPTANCE_VERBOSE"))
          std::printf("  model %d %s adjoint %.12g fd %.12g rel %.3g (|g|/scale %.3g)\n", seed,
                      set.params()[static_cast<std::size_t>(k)].label().c_str(), r.gradient(k), fd(k), e,
                      std::abs(fd(k)) / scale);
      }
    }
    ++models;
  }

  // Informational only: barrel center node Z sensitivity.
  const auto f = fixtures::barrel();
  const int c = f.marks.at("center");
  const ParameterSet bs(f.model, {DesignParameter::node_coord(c, 2, f.model.node(c).z)});
  const double dz = sensitivity(bs, bs.values(), strain_energy_objective()).gradient(0);

  const bool pass = models >= 20 && max_dof <= kAdjointMaxDof && kinds.size() == 3 && objectives.size() == 2 &&
                    failed == 0 && checked > 0;
  return {pass, std::to_string(models) + " models (max " + std::to_string(max_dof) + " DOF), " +
                    std::to_string(checked) + " entries, " + std::to_string(failed) + " above tol, worst rel err " +
                    num(worst) + "; barrel center dSE/dZ " + num(dz) + " vs " + num(kBarrelDz) + " (soft, rel err " +
                    num(rel_diff(dz, kBarrelDz)) + (rel_diff(dz, kBarrelDz) <= kBarrelDzTol ? ", within" : ", outside") +
                    " 5%)"};
}

// 5. Solve count per gradient.
Outcome adjoint_cost() {
  fixtures::DomeOptions o;
  o.n = 10;
  const auto f = fixtures::dome(o);
  const auto ids = free_nodes(f.model);
  bool pass = true;
  std::string detail;
  for (std::size_t n : {1u, 10u, 100u}) {
    const std::vector<int> sel(ids.begin(), ids.begin() + static_cast<long>(n));
    const ParameterSet set(f.model, z_params(f.model, sel));
    solver_counters().reset();
    const auto r = sensitivity(set, set.values(), strain_energy_objective());
    const long fac = solver_counters().factorizations, solves = solver_counters().solves;
    pass = pass && fac == 1 && solves == 2 && r.gradient.size() == static_cast<Index>(n);
    detail += (detail.empty() ? "" : "; ") + ("n=" + std::to_string(n) + ": " + std::to_string(fac) +
                                                " factorization, " + std::to_string(solves) + " solves");
  }
  return {pass, detail};
}

// 6. Gridshell shape optimization.
Outcome shape_trend() {
  const auto f = fixtures::gridshell();
  const auto& m = f.model;
  double edge = 0.0;
  for (std::size_t b = 0; b < m.beams().size(); ++b) {
    const auto& ni = m.beam_node_indices(b);
    edge += (m.nodes()[static_cast<std::size_t>(ni[1])].position() - m.nodes()[static_cast<std::size_t>(ni[0])].position()).norm();
  }
  edge /= static_cast<double>(m.beams().size());
  const auto ids = free_nodes(m);
  const ParameterSet set(m, z_params(m, ids));
  OptimizationProblem prob{set, strain_energy_objective(), {}, {}, {}, {}};
  VariableGroup g;
  g.name = "z";
  g.count = ids.size();
  g.filter = HatFilter(node_positions(m, ids), 3.0 * edge);
  g.lb = VectorXd::Constant(static_cast<Index>(g.count), -std::numeric_limits<double>::infinity());
  g.ub = VectorXd::Constant(static_cast<Index>(g.count), std::numeric_limits<double>::infinity());
  prob.groups.push_back(g);
  OptimizerConfig oc;
  oc.step = 0.1;
  const auto h = run_optimization(prob, oc, set.values(), kShapeIterations);
  const double se0 = h.entries.front().objective;
  long reached = -1;
  for (const auto& e : h.entries)
    if (e.objective <= (1.0 - kShapeReduction) * se0) {
      reached = e.iteration;
      break;
    }
  const double red = 1.0 - h.entries.back().objective / se0;
  return {m.nodes().size() == 200 && reached >= 0 && !h.error,
          std::to_string(m.nodes().size()) + " nodes, radius " + num(3.0 * edge) + ", strain energy " + num(se0) +
              " -> " + num(h.entries.back().objective) + " (" + num(100 * red) + "% reduction), 90% reached at iteration " +
              std::to_string(reached) + (h.error ? ", error: " + *h.error : "")};
}

// 7. Size optimization on a shape-optimized dome.
Outcome size_behavior() {
  fixtures::DomeOptions o;
  o.n = 10;
  o.loads = "all";
  o.load = 10.0;
  const auto f = fixtures::dome(o);
  const auto ids = free_nodes(f.model);
  const ParameterSet set(f.model, z_params(f.model, ids));
  OptimizationProblem shape{set, strain_energy_objective(), {}, {}, {}, {}};
  VariableGroup g;
  g.name = "z";
  g.count = ids.size();
  g.filter = HatFilter(node_positions(f.model, ids), 3.0 * o.span / o.n);
  g.lb = VectorXd::Zero(static_cast<Index>(g.count));
  g.ub = VectorXd::Constant(static_cast<Index>(g.count), 3.0);
  shape.groups.push_back(g);
  OptimizerConfig soc;
  soc.step = 0.1;
  const auto hs = run_optimization(shape, soc, set.values(), 50);
  if (hs.error) return {false, "shape stage failed: " + *hs.error};
  const StructuralModel shaped = set.realize(hs.p);

  std::vector<DesignParameter> tp;
  for (const auto& q : shaped.quads()) tp.push_back(DesignParameter::thickness(q.id, q.t));
  const ParameterSet ts(shaped, tp);
  const double u0 = max_abs_component(solve(assemble(shaped), {}, &shaped).u, 2);
  SizeObjectiveConfig sc;
  sc.u_max = 1.5 * u0;
  sc.t_min = 0.05;
  auto so = std::make_shared<SizeObjective>(sc);
  OptimizationProblem size{ts, so->objective(), {}, {}, {}, {}};
  size.after_step = [so] { so->advance(); };
  size.diagnostics = [so](const SensitivityResult& r) {
    return std::vector<std::pair<std::string, double>>{{"u", max_abs_component(r.u, 2)}, {"W", so->last().W}};
  };
  VariableGroup tg;
  tg.name = "t";
  tg.count = tp.size();
  tg.lb = VectorXd::Constant(static_cast<Index>(tg.count), 0.01);
  tg.ub = VectorXd::Constant(static_cast<Index>(tg.count), 1.0);
  size.groups.push_back(tg);
  OptimizerConfig oc;
  oc.step = 0.001;
  const auto h = run_optimization(size, oc, ts.values(), 300);
  if (h.error) return {false, "size stage failed: " + *h.error};

  std::vector<double> u, W;
  for (const auto& e : h.entries) {
    u.push_back(e.extras.at(0).second);
    W.push_back(e.extras.at(1).second);
  }
  std::size_t k_cap = u.size();
  for (std::size_t k = 0; k < u.size(); ++k)
    if (u[k] >= sc.u_max) {
      k_cap = k;
      break;
    }
  bool grows = k_cap > 0 && k_cap < u.size();
  for (std::size_t k = 1; k < k_cap && grows; ++k) grows = u[k] >= u[k - 1];
  double band = 0.0;
  for (std::size_t k = k_cap; k < u.size(); ++k) band = std::max(band, std::abs(u[k] / sc.u_max - 1.0));
  const bool pass = grows && band <= kCapBand && W.back() < W.front();
  return {pass, "u_max " + num(sc.u_max) + " reached at iteration " + std::to_string(k_cap) + (grows ? " after monotone growth" : "") +
                    ", max deviation afterwards " + num(100 * band) + "% over " + std::to_string(u.size() - k_cap) +
                    " iterations, volume " + num(W.front()) + " -> " + num(W.back())};
}

// 8. Density plus shape with a volume budget.
Outcome simp_shape() {
  fixtures::DomeOptions o;
  o.n = 16;
  const auto f = fixtures::dome(o);
  const auto& m = f.model;
  const auto ids = free_nodes(m);
  std::vector<DesignParameter> ps = z_params(m, ids);
  const std::size_t ns = ps.size();
  std::vector<int> qids;
  const double rho0 = 0.1;
  for (const auto& q : m.quads()) {
    ps.push_back(DesignParameter::density(q.id, rho0));
    qids.push_back(q.id);
  }
  const ParameterSet set(m, ps, SimpConfig{7.0, 0.01});
  OptimizationProblem prob{set, io::normalized(strain_energy_objective(), std::make_shared<double>(0.0)), {}, {}, {}, {}};
  const ShapeBox box{0.0, 3.0};
  VariableGroup gs;
  gs.name = "shape";
  gs.count = ns;
  gs.offset = box.z_min;
  gs.scale = box.z_max - box.z_min;
  gs.filter = HatFilter(node_positions(m, ids), 1.5);
  gs.mode = FilterMode::Variable;
  gs.lb = VectorXd::Zero(static_cast<Index>(ns));
  gs.ub = VectorXd::Ones(static_cast<Index>(ns));
  VariableGroup gd;
  gd.name = "density";
  gd.first = ns;
  gd.count = qids.size();
  gd.filter = HatFilter(element_centroids(m, qids), 0.5);
  gd.mode = FilterMode::Variable;
  gd.lb = VectorXd::Constant(static_cast<Index>(gd.count), 0.01);
  gd.ub = VectorXd::Ones(static_cast<Index>(gd.count));
  const double budget = 0.5 * static_cast<double>(gd.count);
  gd.volume_budget = budget;
  prob.groups = {gs, gd};
  VectorXd x0(static_cast<Index>(ps.size()));
  for (std::size_t i = 0; i < ns; ++i) x0(static_cast<Index>(i)) = (m.node(ids[i]).z - box.z_min) / (box.z_max - box.z_min);
  x0.tail(static_cast<Index>(qids.size())).setConstant(rho0);
  OptimizerConfig oc;
  oc.kind = OptimizerKind::Mma;
  const auto h = run_optimization(prob, oc, x0, 100);
  if (h.error) return {false, "run failed: " + *h.error};
  const VectorXd pT = h.p.tail(static_cast<Index>(qids.size()));
  const double sum = pT.sum();

  // Solid elements must reach a support through solid edge neighbours.
  const auto sup = m.supported_nodes();
  std::set<int> sup_idx;
  for (int id : sup) sup_idx.insert(m.node_index(id));
  const int load_idx = m.node_index(f.marks.at("center"));
  std::map<std::pair<int, int>, std::vector<std::size_t>> edges;
  const std::size_t nq = m.quads().size();
  std::vector<bool> solid(nq), reached(nq, false);
  std::queue<std::size_t> todo;
  bool load_carried = false;
  int n_solid = 0;
  for (std::size_t q = 0; q < nq; ++q) {
    solid[q] = pT(static_cast<Index>(q)) > kSolidDensity;
    const auto& ni = m.quad_node_indices(q);
    for (int a = 0; a < 4; ++a) edges[std::minmax(ni[a], ni[(a + 1) % 4])].push_back(q);
    if (!solid[q]) continue;
    ++n_solid;
    for (int a = 0; a < 4; ++a) {
      if (ni[a] == load_idx) load_carried = true;
      if (sup_idx.count(ni[a]) && !reached[q]) {
        reached[q] = true;
        todo.push(q);
      }
    }
  }
  while (!todo.empty()) {
    const std::size_t q = todo.front();
    todo.pop();
    const auto& ni = m.quad_node_indices(q);
    for (int a = 0; a < 4; ++a)
      for (std::size_t r : edges[std::minmax(ni[a], ni[(a + 1) % 4])])
        if (solid[r] && !reached[r]) {
          reached[r] = true;
          todo.push(r);
        }
  }
  int n_reached = 0;
  for (std::size_t q = 0; q < nq; ++q) n_reached += reached[q];
  const bool connected = n_solid > 0 && n_reached == n_solid && load_carried;
  return {sum <= budget * kBudgetSlack && connected,
          "sum p_T " + num(sum) + " vs budget " + num(budget) + ", " + std::to_string(n_solid) + " solid elements, " +
              std::to_string(n_reached) + " connected to supports" + (load_carried ? ", load node carried" : ", load node not carried") +
              ", objective " + num(h.entries.front().objective) + " -> " + num(h.entries.back().objective)};
}

// 9. Neural reparameterization.
Outcome neural() {
  const Mlp full(NnConfig{}.widths);
  const bool count_ok = full.parameter_count() == 3442;

  fixtures::DomeOptions o;
  o.n = 8;
  o.t = 0.01;
  o.supports = "edge_mid";
  o.loads = "corners";
  const auto f = fixtures::dome(o);
  NnConfig cfg;
  cfg.V_star = 0.5 * static_cast<double>(f.model.quads().size());
  cfg.seed = 0;
  const NnProblem prob(f.model, cfg);

  const VectorXd theta = prob.mlp().init(1);
  const NnLossConfig lc{prob.compliance(theta, 2.0), 0.3, cfg.V_star};
  const double P = 4.0;
  const NnEvaluation ev = prob.evaluate(theta, lc, P);
  const double gmax = ev.grad_theta.cwiseAbs().maxCoeff();
  std::vector<Index> active;
  for (Index i = 0; i < theta.size(); ++i)
    if (std::abs(ev.grad_theta(i)) > 1e-8 * gmax) active.push_back(i);
  double worst = 0.0;
  int sampled = 0;
  for (int k = 0; k < 10 && !active.empty(); ++k) {
    const Index i = active[static_cast<std::size_t>(k) * active.size() / 10];
    const double h = kNnFdStep * std::max(1.0, std::abs(theta(i)));
    VectorXd a = theta, b = theta;
    a(i) += h;
    b(i) -= h;
    const double fd = (prob.evaluate(a, lc, P, false).loss - prob.evaluate(b, lc, P, false).loss) / (2 * h);
    worst = std::max(worst, rel_diff(ev.grad_theta(i), fd));
    ++sampled;
  }

  const auto r = train(prob);
  if (r.error) return {false, "training failed: " + *r.error};
  const double l0 = r.history.front().loss, l1 = r.history.back().loss;
  const double red = 1.0 - l1 / l0;
  const NnLossConfig final_lc{r.alpha1, cfg.alpha2_at(cfg.epochs - 1), cfg.V_star};
  const double sum = prob.evaluate(r.theta, final_lc, cfg.P_at(cfg.epochs - 1), false).sum_pT;
  const bool pass = count_ok && sampled == 10 && worst <= kNnGradTol && red >= kNnReduction && sum <= cfg.V_star &&
                    static_cast<int>(r.history.size()) == cfg.epochs;
  return {pass, "parameters " + std::to_string(full.parameter_count()) + ", FD worst rel err " + num(worst) + " on " +
                    std::to_string(sampled) + " coordinates, loss " + num(l0) + " -> " + num(l1) + " (" + num(100 * red) +
                    "% reduction), final sum p_T " + num(sum) + " vs budget " + num(cfg.V_star)};
}

// 10. Solver scaling on the multi-span arch.
Outcome solver_scaling() {
  TempDir dir("bench");
  const int rc = run_cli("-o " + (dir / "") + " bench --spans 100 --elements-per-span 2,4,8,16,32,34,64,80 "
                         "--solvers sparse,dense --no-sensitivity --max-dense-dof 21000");
  if (rc != 0) return {false, "bench exited with " + std::to_string(rc)};
  std::istringstream csv(io::read_file(dir / "bench.csv"));
  std::string line;
  std::getline(csv, line);
  std::map<long, double> sparse, dense;
  while (std::getline(csv, line)) {
    std::stringstream ls(line);
    std::string dof, solver, asm_s, solve_s;
    std::getline(ls, dof, ',');
    std::getline(ls, solver, ',');
    std::getline(ls, asm_s, ',');
    std::getline(ls, solve_s, ',');
    (solver == "dense" ? dense : sparse)[std::stol(dof)] = std::stod(solve_s);
  }
  if (sparse.size() < 2) return {false, "too few sparse rows"};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [n, t] : sparse) {
    const double x = std::log(static_cast<double>(n)), y = std::log(t);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double k = static_cast<double>(sparse.size());
  const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  bool dense_slower = false;
  std::string cmp;
  for (const auto& [n, t] : dense)
    if (n > kDenseThresholdDof && sparse.count(n)) {
      dense_slower = t > sparse[n];
      cmp += " at " + std::to_string(n) + " DOF dense " + num(t) + " s vs sparse " + num(sparse[n]) + " s";
    }
  const bool range = sparse.begin()->first == 1206 && sparse.rbegin()->first >= 48006;
  return {range && slope <= kScalingExponent && dense_slower,
          "sparse DOF " + std::to_string(sparse.begin()->first) + ".." + std::to_string(sparse.rbegin()->first) +
              ", fitted exponent " + num(slope) + ";" + (cmp.empty() ? " no dense row above 20000 DOF" : cmp)};
}

// 11. Byte-identical outputs across repeated runs.
std::map<std::string, std::string> outputs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string text = io::read_file(e.path().string());
    // Wall-clock timings are the only run-dependent field.
    if (e.path().filename() == "report.json") {
      auto j = io::json::parse(text);
      j.erase("timings");
      text = j.dump();
    }
    out[e.path().filename().string()] = text;
  }
  return out;
}

Outcome determinism() {
  TempDir dir("determinism");
  if (run_cli("fixtures dome --set n=8 --file " + (dir / "dome.json")) != 0) return {false, "fixture generation failed"};
  io::write_file(dir / "scenario.json", R"({
    "model": {"fixture": "dome", "options": {"n": 8}},
    "parameters": [{"kind": "node_coord", "nodes": "free", "filter_radius": 1.0},
                   {"kind": "thickness", "bounds": [0.05, 0.5]}],
    "optimizer": {"kind": "gd", "step": 0.01},
    "max_iter": 10, "snapshot_every": 5})");
  bool pass = true;
  std::string detail;
  for (const std::string cmd : {"solve " + (dir / "dome.json"), "optimize " + (dir / "scenario.json")}) {
    std::vector<std::map<std::string, std::string>> runs;
    for (int r = 0; r < kDeterminismRuns; ++r) {
      const std::string out = dir / ("run" + std::to_string(runs.size()) + "_" + cmd.substr(0, cmd.find(' ')));
      fs::create_directories(out);
      if (run_cli("--threads 1 -o " + out + " " + cmd) != 0) return {false, cmd.substr(0, cmd.find(' ')) + " failed"};
      runs.push_back(outputs(out));
    }
    const bool same = runs[1] == runs[0] && runs[2] == runs[0];
    pass = pass && same && !runs[0].empty();
    detail += (detail.empty() ? "" : "; ") + cmd.substr(0, cmd.find(' ')) + ": " + std::to_string(runs[0].size()) +
              " files " + (same ? "identical" : "differ") + " across " + std::to_string(kDeterminismRuns) + " runs";
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, 1, element_exactness},  {2, 30, shell_convergence}, {3, 10, barrel_validation},
      {4, 120, adjoint_correctness}, {5, 10, adjoint_cost},  {6, 120, shape_trend},
      {7, 180, size_behavior},    {8, 300, simp_shape},       {9, 600, neural},
      {10, 600, solver_scaling},  {11, 60, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = dt <= c.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("criterion %d: %s - %s [%.1f s of %.0f s budget%s]\n", c.id, pass ? "PASS" : "FAIL", o.detail.c_str(), dt,
                c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
