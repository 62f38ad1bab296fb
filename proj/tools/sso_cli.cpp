// Command-line front end: solve, sensitivity, validate-fd, optimize,
// train-nn, bench and fixtures.
//
// Exit codes: 0 ok, 1 input error, 2 validation failure, 3 numerical failure.

#include "sso/io.hpp"
#include "sso/sso.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sso;
using io::json;

namespace {

enum Exit { kOk = 0, kInput = 1, kValidation = 2, kNumerical = 3 };

struct ValidationFailure : Error {
  using Error::Error;
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Common {
  std::optional<std::string> solver;
  int threads = 0;
  std::string out_dir = ".";
};

SolverChoice solver_choice(const Common& c, SolverChoice fallback = {}) {
  if (!c.solver) return fallback;
  try {
    fallback.kind = parse_solver_kind(*c.solver);
  } catch (const Error& e) {
    throw InputError("", e.what());
  }
  return fallback;
}

std::string out_path(const Common& c, const std::string& name) { return (fs::path(c.out_dir) / name).string(); }

void prepare_out_dir(const Common& c) {
  std::error_code ec;
  fs::create_directories(c.out_dir, ec);
  if (ec) throw InputError("", "cannot create output directory '" + c.out_dir + "'");
}

void write_report(const Common& c, json report, const std::vector<std::string>& outputs) {
  report["outputs"] = outputs;
  io::write_file(out_path(c, "report.json"), report.dump(2) + "\n");
}

std::string dir_of(const std::string& path) { return fs::path(path).parent_path().string(); }

// ---------------------------------------------------------------------------

int cmd_solve(const Common& c, const std::string& model_path) {
  const StructuralModel m = io::model_from_json(io::load_json(model_path));
  const SolverChoice choice = solver_choice(c);
  prepare_out_dir(c);

  auto t0 = Clock::now();
  const AugmentedSystem sys = assemble(m);
  const double t_asm = seconds_since(t0);
  t0 = Clock::now();
  const Factorization fac(sys, choice, &m);
  const double t_fac = seconds_since(t0);
  t0 = Clock::now();
  const Solution s = solve_with(fac, sys);
  const double t_sol = seconds_since(t0);

  const VectorXd f = sys.f_aug.head(sys.dof);
  io::write_file(out_path(c, "u.csv"), io::displacements_csv(m, s.u));
  io::write_file(out_path(c, "reactions.csv"), io::reactions_csv(m, reactions(s)));
  json report{{"command", "solve"},
              {"model", model_path},
              {"solver", solver_name(choice.kind)},
              {"dof", sys.dof},
              {"dof_bc", sys.dof_bc},
              {"nodes", m.nodes().size()},
              {"elements", m.element_count()},
              {"strain_energy", strain_energy(f, s.u)},
              {"max_abs_uz", max_abs_component(s.u, 2)},
              {"residual_norm", s.residual_norm},
              {"timings", {{"assembly_s", t_asm}, {"factorization_s", t_fac}, {"solve_s", t_sol}}}};
  write_report(c, report, {"u.csv", "reactions.csv", "report.json"});
  std::cout << "strain energy " << io::fmt(strain_energy(f, s.u)) << ", max |uz| " << io::fmt(max_abs_component(s.u, 2))
            << " (" << sys.dof << " DOF)\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct SensitivitySetup {
  StructuralModel model;
  ParameterSet params;
  Objective objective;
  io::ObjectiveSpec spec;
  std::shared_ptr<SizeObjective> size;
};

SensitivitySetup load_sensitivity_setup(const std::string& model_path, const std::string& params_path) {
  SensitivitySetup s;
  s.model = io::model_from_json(io::load_json(model_path));
  const json pj = io::load_json(params_path);
  try {
    const auto groups = io::parameter_groups_from_json(s.model, pj);
    s.params = io::parameter_set_from_groups(s.model, groups, io::simp_from_json(pj.value("simp", json()), "/simp"));
    s.spec = io::objective_from_json(pj.value("objective", json()), "/objective");
  } catch (const InputError& e) {
    throw InputError(e.pointer(), params_path + ": " + e.what());
  }
  if (s.spec.kind == "penalized_volume") {
    s.size = std::make_shared<SizeObjective>(s.spec.size);
    s.objective = s.size->objective();
  } else {
    s.objective = strain_energy_objective();
  }
  return s;
}

int cmd_sensitivity(const Common& c, const std::string& model_path, const std::string& params_path) {
  SensitivitySetup s = load_sensitivity_setup(model_path, params_path);
  prepare_out_dir(c);
  const auto t0 = Clock::now();
  const SensitivityResult r = sensitivity(s.params, s.params.values(), s.objective, solver_choice(c));
  const double t = seconds_since(t0);
  std::string csv = "parameter,value,gradient\n";
  const VectorXd p = s.params.values();
  for (std::size_t k = 0; k < s.params.size(); ++k)
    csv += s.params.params()[k].label() + "," + io::fmt(p(static_cast<Index>(k))) + "," +
           io::fmt(r.gradient(static_cast<Index>(k))) + "\n";
  io::write_file(out_path(c, "sensitivity.csv"), csv);
  json report{{"command", "sensitivity"},
              {"model", model_path},
              {"parameters", s.params.size()},
              {"objective", s.spec.kind},
              {"value", r.value},
              {"timings", {{"sensitivity_s", t}}}};
  write_report(c, report, {"sensitivity.csv", "report.json"});
  std::cout << s.spec.kind << " = " << io::fmt(r.value) << ", " << s.params.size() << " gradient entries\n";
  return kOk;
}

int cmd_validate_fd(const Common& c, const std::string& model_path, const std::string& params_path, double step,
                    double threshold) {
  if (!(step > 0.0)) throw InputError("", "--step must be positive");
  if (!(threshold > 0.0)) throw InputError("", "--threshold must be positive");
  SensitivitySetup s = load_sensitivity_setup(model_path, params_path);
  prepare_out_dir(c);
  const SolverChoice choice = solver_choice(c);
  const VectorXd p = s.params.values();
  const SensitivityResult r = sensitivity(s.params, p, s.objective, choice);
  const VectorXd fd = fd_gradient(s.params, p, s.objective, step, choice);
  const double scale = std::max(r.gradient.cwiseAbs().maxCoeff(), fd.cwiseAbs().maxCoeff());
  std::string csv = "parameter,adjoint,fd,rel_err\n";
  double worst = 0.0;
  for (std::size_t k = 0; k < s.params.size(); ++k) {
    const Index i = static_cast<Index>(k);
    const double a = r.gradient(i), b = fd(i);
    const double mag = std::max(std::abs(a), std::abs(b));
    // Entries at the noise floor of the largest entry count as agreeing.
    const double rel = mag > 1e-12 * scale ? std::abs(a - b) / mag : 0.0;
    worst = std::max(worst, rel);
    csv += s.params.params()[k].label() + "," + io::fmt(a) + "," + io::fmt(b) + "," + io::fmt(rel) + "\n";
  }
  io::write_file(out_path(c, "fd_check.csv"), csv);
  const bool ok = worst <= threshold;
  json report{{"command", "validate-fd"}, {"model", model_path},       {"parameters", s.params.size()},
              {"step", step},             {"threshold", threshold},    {"max_rel_err", worst},
              {"passed", ok}};
  write_report(c, report, {"fd_check.csv", "report.json"});
  std::cout << "max relative error " << io::fmt(worst) << (ok ? " (ok)\n" : " exceeds threshold\n");
  if (!ok) throw ValidationFailure("adjoint and finite-difference gradients disagree");
  return kOk;
}

// ---------------------------------------------------------------------------

json snapshot_json(long iteration, const StructuralModel& m, const ParameterSet& ps, const VectorXd& p) {
  json params = json::array();
  for (std::size_t k = 0; k < ps.size(); ++k) params.push_back({{"parameter", ps.params()[k].label()}, {"value", p(static_cast<Index>(k))}});
  return {{"iteration", iteration}, {"parameters", params}, {"model", io::model_to_json(m)}};
}

int cmd_optimize(const Common& c, const std::string& scenario_path) {
  const io::Scenario sc = io::scenario_from_json(io::load_json(scenario_path), dir_of(scenario_path));
  if (sc.groups.empty()) throw InputError("/parameters", "missing required field");
  prepare_out_dir(c);
  const ParameterSet ps = io::parameter_set_from_groups(sc.model, sc.groups, sc.simp);
  const io::ProblemLayout layout = io::layout_groups(sc.model, sc.groups, sc.simp);

  std::shared_ptr<SizeObjective> size;
  Objective g;
  if (sc.objective.kind == "penalized_volume") {
    size = std::make_shared<SizeObjective>(sc.objective.size);
    g = size->objective();
  } else {
    g = strain_energy_objective();
  }
  auto scale = std::make_shared<double>(0.0);
  if (sc.objective.normalize) g = io::normalized(g, scale);

  OptimizationProblem prob{ps, g, layout.groups, solver_choice(c, sc.solver), {}, {}};
  const int comp = sc.objective.kind == "penalized_volume" ? sc.objective.size.component : 2;
  prob.diagnostics = [&](const SensitivityResult& r) {
    std::vector<std::pair<std::string, double>> d;
    d.emplace_back("strain_energy", strain_energy(r.f, r.u));
    d.emplace_back(std::string("max_abs_") + (comp == 2 ? "uz" : component_name(comp)), max_abs_component(r.u, comp));
    if (size) {
      d.emplace_back("volume", size->last().W);
      d.emplace_back("violation", size->last().c);
      d.emplace_back("eps1", size->config().eps1);
    }
    return d;
  };
  if (size) prob.after_step = [size] { size->advance(); };

  std::vector<std::string> outputs;
  auto on_iter = [&](const IterationView& v) {
    if (sc.snapshot_every > 0 && v.iteration % sc.snapshot_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "snapshot_%05ld.json", v.iteration);
      io::write_file(out_path(c, name), snapshot_json(v.iteration, v.model, ps, v.p).dump() + "\n");
      outputs.emplace_back(name);
    }
  };
  const auto t0 = Clock::now();
  const OptimizationHistory h = run_optimization(prob, sc.optimizer, layout.x0, sc.max_iter, on_iter);
  const double t = seconds_since(t0);

  std::string csv = "iteration,objective";
  for (const auto& grp : layout.groups)
    if (grp.volume_budget) csv += ",density_sum_" + std::to_string(&grp - layout.groups.data());
  if (!h.entries.empty())
    for (const auto& [k, v] : h.entries.front().extras) csv += "," + k;
  csv += "\n";
  for (const auto& e : h.entries) {
    csv += std::to_string(e.iteration) + "," + io::fmt(e.objective);
    for (double v : e.constraints) csv += "," + io::fmt(v);
    for (const auto& [k, v] : e.extras) csv += "," + io::fmt(v);
    csv += "\n";
  }
  io::write_file(out_path(c, "history.csv"), csv);
  outputs.insert(outputs.begin(), "history.csv");
  if (!h.entries.empty()) {
    io::write_file(out_path(c, "final.json"), snapshot_json(h.entries.back().iteration, ps.realize(h.p), ps, h.p).dump() + "\n");
    outputs.emplace_back("final.json");
  }
  outputs.emplace_back("report.json");
  json report{{"command", "optimize"},
              {"scenario", scenario_path},
              {"parameters", ps.size()},
              {"iterations", h.entries.empty() ? 0 : h.entries.back().iteration},
              {"objective_initial", h.entries.empty() ? 0.0 : h.entries.front().objective},
              {"objective_final", h.entries.empty() ? 0.0 : h.entries.back().objective},
              {"objective_scale", sc.objective.normalize ? *scale : 1.0},
              {"timings", {{"total_s", t}}}};
  if (h.error) report["error"] = *h.error;
  write_report(c, report, outputs);
  if (!h.entries.empty())
    std::cout << "objective " << io::fmt(h.entries.front().objective) << " -> " << io::fmt(h.entries.back().objective)
              << " after " << h.entries.back().iteration << " iterations\n";
  if (h.error) throw NumericalError(*h.error);
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_train_nn(const Common& c, const std::string& scenario_path) {
  const json j = io::load_json(scenario_path);
  if (!j.is_object()) throw InputError("", "scenario must be an object");
  const StructuralModel m = io::model_from_reference(io::detail::field(j, "model", ""), "/model", dir_of(scenario_path));
  const NnConfig cfg = io::nn_config_from_json(j.value("nn", json()), m.quads().size(), "/nn");
  const SolverChoice choice = solver_choice(c, io::solver_from_json(j.value("solver", json()), "/solver"));
  NnProblem prob = [&] {
    try {
      return NnProblem(m, cfg);
    } catch (const NumericalError&) {
      throw;
    } catch (const Error& e) {
      throw InputError("/nn", e.what());
    }
  }();
  prepare_out_dir(c);
  const auto t0 = Clock::now();
  const TrainResult r = train(prob, choice);
  const double t = seconds_since(t0);

  std::string csv = "epoch,loss,strain_energy,sum_pT,alpha2,P\n";
  for (const auto& h : r.history)
    csv += std::to_string(h.epoch) + "," + io::fmt(h.loss) + "," + io::fmt(h.strain_energy) + "," + io::fmt(h.sum_pT) +
           "," + io::fmt(h.alpha2) + "," + io::fmt(h.P) + "\n";
  io::write_file(out_path(c, "train_history.csv"), csv);
  io::write_file(out_path(c, "mlp_params.json"), io::mlp_params_to_json(prob.mlp(), r.theta, cfg.squash).dump() + "\n");

  const NnFields f = prob.fields(r.theta);
  json nodes = json::array(), elems = json::array();
  for (std::size_t i = 0; i < m.nodes().size(); ++i) {
    const auto& n = m.nodes()[i];
    const Index k = static_cast<Index>(i);
    nodes.push_back({{"id", n.id}, {"x", n.x}, {"y", n.y}, {"z", f.z(k)}, {"p_S", f.p_S(k)}});
  }
  for (std::size_t q = 0; q < m.quads().size(); ++q)
    elems.push_back({{"id", m.quads()[q].id}, {"p_T", f.p_T(static_cast<Index>(q))}});
  io::write_file(out_path(c, "final_fields.json"), json{{"nodes", nodes}, {"elements", elems}}.dump() + "\n");

  json report{{"command", "train-nn"},
              {"scenario", scenario_path},
              {"parameters", prob.mlp().parameter_count()},
              {"alpha1", r.alpha1},
              {"V_star", cfg.V_star},
              {"epochs", r.history.size()},
              {"loss_initial", r.history.empty() ? 0.0 : r.history.front().loss},
              {"loss_final", r.history.empty() ? 0.0 : r.history.back().loss},
              {"timings", {{"total_s", t}}}};
  if (r.error) report["error"] = *r.error;
  write_report(c, report, {"train_history.csv", "mlp_params.json", "final_fields.json", "report.json"});
  if (!r.history.empty())
    std::cout << "loss " << io::fmt(r.history.front().loss) << " -> " << io::fmt(r.history.back().loss) << ", sum p_T "
              << io::fmt(r.history.back().sum_pT) << " (V* " << io::fmt(cfg.V_star) << ")\n";
  if (r.error) throw NumericalError(*r.error);
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_bench(const Common& c, int spans, const std::vector<int>& per_span, const std::vector<std::string>& solvers,
              bool with_sensitivity, long max_dense_dof) {
  if (spans < 1) throw InputError("", "--spans must be positive");
  std::vector<SolverKind> kinds;
  for (const auto& s : solvers) {
    try {
      kinds.push_back(parse_solver_kind(s));
    } catch (const Error& e) {
      throw InputError("", e.what());
    }
  }
  if (c.solver) kinds = {solver_choice(c).kind};
  prepare_out_dir(c);
  std::string csv = "dof,solver,assembly_s,solve_s,sensitivity_s\n";
  std::cout << csv;
  for (int n : per_span) {
    if (n < 2) throw InputError("", "--elements-per-span values must be >= 2");
    fixtures::MultispanOptions o;
    o.spans = spans;
    o.elements_per_span = n;
    const StructuralModel m = fixtures::multispan_arch(o).model;
    for (SolverKind k : kinds) {
      if (k == SolverKind::DenseLU && m.dof() > max_dense_dof) continue;
      SolverChoice choice;
      choice.kind = k;
      auto t0 = Clock::now();
      const AugmentedSystem sys = assemble(m);
      const double t_asm = seconds_since(t0);
      t0 = Clock::now();
      solve(sys, choice, &m);
      const double t_sol = seconds_since(t0);
      double t_sens = 0.0;
      if (with_sensitivity) {
        std::vector<DesignParameter> params;
        for (const auto& node : m.nodes()) params.push_back(DesignParameter::node_coord(node.id, 2, node.z));
        const ParameterSet ps(m, params);
        t0 = Clock::now();
        sensitivity(ps, ps.values(), strain_energy_objective(), choice);
        t_sens = seconds_since(t0);
      }
      const std::string row = std::to_string(sys.dof) + "," + solver_name(k) + "," + io::fmt(t_asm) + "," +
                              io::fmt(t_sol) + "," + (with_sensitivity ? io::fmt(t_sens) : std::string("")) + "\n";
      csv += row;
      std::cout << row << std::flush;
    }
  }
  io::write_file(out_path(c, "bench.csv"), csv);
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_fixtures(const std::string& name, const std::vector<std::string>& sets, const std::string& out_file) {
  json opt = json::object();
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw InputError("", "--set expects key=value, got '" + s + "'");
    const std::string key = s.substr(0, eq), val = s.substr(eq + 1);
    json v;
    try {
      v = json::parse(val);
    } catch (const json::parse_error&) {
      v = val;  // bare word, e.g. supports=edge_mid
    }
    opt[key] = v;
  }
  const fixtures::Fixture f = io::fixture_from_json(name, opt, "");
  json j = io::model_to_json(f.model);
  if (!f.marks.empty()) j["marks"] = f.marks;
  const std::string text = j.dump(1) + "\n";
  if (out_file.empty() || out_file == "-") std::cout << text;
  else io::write_file(out_file, text);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable linear-static finite elements for structural optimization"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--threads", common.threads, "Worker threads (0: SSO_THREADS or hardware)")->check(CLI::NonNegativeNumber);
  app.add_option("--solver", common.solver, "Linear solver backend")->check(CLI::IsMember({"dense", "sparse"}));
  app.add_option("-o,--out", common.out_dir, "Output directory");

  std::string model, params, scenario;
  auto* solve_cmd = app.add_subcommand("solve", "Linear static analysis: u.csv, reactions.csv, report.json");
  solve_cmd->add_option("model", model, "Model JSON")->required();

  auto* sens_cmd = app.add_subcommand("sensitivity", "Adjoint gradient of an objective: sensitivity.csv");
  sens_cmd->add_option("model", model, "Model JSON")->required();
  sens_cmd->add_option("params", params, "Parameter spec JSON")->required();

  double step = kDefaultFdStep, threshold = 1e-4;
  auto* fd_cmd = app.add_subcommand("validate-fd", "Compare adjoint and central finite-difference gradients");
  fd_cmd->add_option("model", model, "Model JSON")->required();
  fd_cmd->add_option("params", params, "Parameter spec JSON")->required();
  fd_cmd->add_option("--step", step, "Relative FD step h = step (1 + |p|)");
  fd_cmd->add_option("--threshold", threshold, "Maximum accepted relative error");

  auto* opt_cmd = app.add_subcommand("optimize", "Run a shape, size or topology optimization scenario");
  opt_cmd->add_option("scenario", scenario, "Scenario JSON")->required();

  auto* nn_cmd = app.add_subcommand("train-nn", "Train an MLP reparameterization of shape and density");
  nn_cmd->add_option("scenario", scenario, "Scenario JSON")->required();

  int spans = 100;
  std::vector<int> per_span{2, 4, 8, 16, 32, 64, 80};
  std::vector<std::string> solvers{"sparse", "dense"};
  bool no_sens = false;
  long max_dense = 25000;
  auto* bench_cmd = app.add_subcommand("bench", "Timing sweep on the procedural multi-span arch: bench.csv");
  bench_cmd->add_option("--spans", spans, "Number of arch spans");
  bench_cmd->add_option("--elements-per-span", per_span, "Elements per span (sweep)")->delimiter(',');
  bench_cmd->add_option("--solvers", solvers, "Backends to time")->delimiter(',');
  bench_cmd->add_flag("--no-sensitivity", no_sens, "Skip the sensitivity timing");
  bench_cmd->add_option("--max-dense-dof", max_dense, "Skip dense runs above this DOF count");

  std::string fixture_name, fixture_out;
  std::vector<std::string> sets;
  auto* fix_cmd = app.add_subcommand("fixtures", "Write a procedural benchmark model as JSON");
  fix_cmd->add_option("name", fixture_name, "arch2d | barrel | dome | gridshell | multispan | plate")->required();
  fix_cmd->add_option("--set", sets, "Generator option key=value (repeatable)");
  fix_cmd->add_option("--file", fixture_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInput;
  }

  if (common.threads > 0) set_threads(common.threads);
  try {
    if (*solve_cmd) return cmd_solve(common, model);
    if (*sens_cmd) return cmd_sensitivity(common, model, params);
    if (*fd_cmd) return cmd_validate_fd(common, model, params, step, threshold);
    if (*opt_cmd) return cmd_optimize(common, scenario);
    if (*nn_cmd) return cmd_train_nn(common, scenario);
    if (*bench_cmd) return cmd_bench(common, spans, per_span, solvers, !no_sens, max_dense);
    if (*fix_cmd) return cmd_fixtures(fixture_name, sets, fixture_out);
  } catch (const ValidationFailure& e) {
    std::cerr << "validation failed: " << e.what() << "\n";
    return kValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  }
  return kInput;
}
