#include "clfstack/commands.hpp"

#include "clfstack/clf.hpp"
#include "clfstack/config.hpp"
#include "clfstack/grid.hpp"
#include "clfstack/log.hpp"
#include "clfstack/plot.hpp"
#include "clfstack/sim.hpp"
#include "clfstack/verify.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

namespace clfstack {
namespace fs = std::filesystem;

namespace {

std::string output_dir(const ScenarioConfig& cfg, const CommandOptions& opt) {
  const std::string dir = opt.out.empty() ? resolve_path(cfg, cfg.output.dir) : opt.out;
  fs::create_directories(dir);
  return dir;
}

void say(const CommandOptions& opt, const std::string& line) {
  if (!opt.quiet) std::cout << line << '\n';
}

void emit_plots(const ScenarioConfig& cfg, const SimulationTrace& trace, const std::string& dir,
                std::vector<std::string>& written) {
  std::vector<double> switches;
  for (std::size_t i = 1; i < cfg.schedule.size(); ++i) switches.push_back(cfg.schedule[i].t_start);
  const std::string values = (fs::path(dir) / "values.svg").string();
  save_svg(values, value_chart(trace, switches));
  written.push_back(values);

  if (cfg.system.type == "single_integrator" && cfg.system.workspace_dim == 2) {
    std::vector<PlotMarker> goals;
    std::vector<std::pair<int, int>> edges;
    for (const TaskConfig& t : cfg.tasks) {
      if (t.type == "goto_goal" && t.goal.size() == 2) {
        goals.push_back({t.goal[0], t.goal[1], t.id});
      } else if (t.type == "formation") {
        const FormationSpec spec = t.shape == "hexagon" ? hexagon_formation(t.side)
                                                        : FormationSpec{t.weights, 2};
        for (int i = 0; i < spec.robot_count(); ++i)
          for (int j = i + 1; j < spec.robot_count(); ++j)
            if (spec.is_neighbor(i, j)) edges.emplace_back(i, j);
      }
    }
    const std::string traj = (fs::path(dir) / "trajectories.svg").string();
    save_svg(traj, trajectory_chart(trace, cfg.system.robot_count, goals, edges));
    written.push_back(traj);
  } else {
    const std::string states = (fs::path(dir) / "states.svg").string();
    save_svg(states, state_chart(trace));
    written.push_back(states);
  }
}

std::pair<Matrix, Matrix> plant_matrices(const ScenarioConfig& cfg) {
  if (cfg.system.type == "double_integrator") {
    Matrix a(2, 2), b(2, 1);
    a << 0, 1, 0, 0;
    b << 0, 1;
    return {a, b};
  }
  if (cfg.system.type == "linear") return {cfg.system.a, cfg.system.b};
  throw ValidationError("compare-appendix-a needs a double_integrator or linear system, got '" +
                        cfg.system.type + "'");
}

GridValueFunction learn_grid(const ScenarioConfig& cfg, const CommandOptions& opt) {
  LearningProblem prob = build_learning(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  ValueIterationResult r = value_iteration(prob.system, prob.stage_cost, prob.vi);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream os;
  os << "value iteration: " << r.sweeps << " sweeps, residual " << std::setprecision(3)
     << r.residual << ", " << std::setprecision(3) << secs << " s";
  say(opt, os.str());
  return shift_to_zero(r.value, prob.vi.goal);
}

}  // namespace

ControllerComparison compare_controllers(const ControlAffineSystem& sys, const Matrix& b,
                                         const Matrix& p, const Matrix& q,
                                         const ProviderPtr& learned, const Vector& x0,
                                         double horizon, double dt) {
  require(dt > 0.0 && horizon > 0.0, "compare_controllers: dt and horizon must be positive");
  CLFContext quad(std::make_shared<QuadraticProvider>(p, q), sys);
  CLFContext grid(learned, sys);
  ControllerComparison out;
  const long steps = std::lround(horizon / dt);
  Vector xa = x0, xb = x0, xc = x0;
  for (long k = 0; k <= steps; ++k) {
    const Vector ua = -b.transpose() * p * xa;
    const Vector ub = min_norm_control(quad, xa).u;
    const Vector uc = min_norm_control(grid, xa).u;
    const Vector ub_own = min_norm_control(quad, xb).u;
    const Vector uc_own = min_norm_control(grid, xc).u;
    out.t.push_back(static_cast<double>(k) * dt);
    out.x_opt.push_back(xa);
    out.u_opt.push_back(ua);
    out.u_quad.push_back(ub);
    out.u_learned.push_back(uc);
    out.x_quad_own.push_back(xb);
    out.u_quad_own.push_back(ub_own);
    out.x_learned_own.push_back(xc);
    out.u_learned_own.push_back(uc_own);
    out.deviation_quad = std::max(out.deviation_quad, (ua - ub).norm());
    out.deviation_learned = std::max(out.deviation_learned, (ua - uc).norm());
    out.deviation_learned_own = std::max(out.deviation_learned_own, (ua - uc_own).norm());
    if (k == steps) break;
    xa = step_rk4(sys, xa, ua, dt);
    xb = step_rk4(sys, xb, ub_own, dt);
    xc = step_rk4(sys, xc, uc_own, dt);
  }
  return out;
}

int cmd_learn(const CommandOptions& opt) {
  const ScenarioConfig cfg = load_config(opt.config);
  const std::string dir = output_dir(cfg, opt);
  const GridValueFunction gvf = learn_grid(cfg, opt);
  const std::string path = (fs::path(dir) / cfg.output.grid).string();
  save_grid(path, gvf);
  say(opt, "wrote " + path);
  return kExitOk;
}

int cmd_simulate(const CommandOptions& opt) {
  const ScenarioConfig cfg = load_config(opt.config);
  const Scenario scenario = build_scenario(cfg);
  const std::string dir = output_dir(cfg, opt);
  const auto t0 = std::chrono::steady_clock::now();
  const SimulationTrace trace = run(scenario);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string trace_path = (fs::path(dir) / cfg.output.trace).string();
  save_trace_csv(trace_path, trace);
  std::vector<std::string> written{trace_path};

  const PhaseReport phases =
      phase_report(trace, scenario.schedule,
                   cfg.output.checks == "three_phase" ? three_phase_expectations()
                                                      : std::vector<PhaseExpectation>{});
  bool checks_passed = phases.all_passed();
  const std::string report_path = (fs::path(dir) / "phase_report.txt").string();
  {
    std::ofstream os(report_path);
    write_phase_report(os, phases, trace);
    if (cfg.output.checks == "nullspace") {
      const PrioritizationMatrix k =
          build_K(scenario.schedule.segments.front().relations, scenario.task_ids());
      const NullspaceReport ns = check_nullspace_convergence(trace, k, 0.05);
      os << (ns.converged ? "[PASS]" : "[FAIL]") << " |K J| final " << ns.final_value
         << " initial " << ns.initial << " ratio " << ns.ratio << " (limit 0.05)\n";
      checks_passed = checks_passed && ns.converged;
    }
  }
  written.push_back(report_path);
  if (cfg.output.plot && !opt.no_plot) emit_plots(cfg, trace, dir, written);

  std::ostringstream os;
  os << cfg.name << ": " << trace.size() << " records, " << std::setprecision(3) << secs << " s";
  say(opt, os.str());
  if (!trace.records.empty()) {
    std::ostringstream fin;
    fin << "final values:";
    const Vector& v = trace.records.back().values;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      fin << ' ' << trace.task_ids[i] << '=' << std::setprecision(6) << v[i];
    }
    say(opt, fin.str());
  }
  for (const std::string& w : written) say(opt, "wrote " + w);
  if (cfg.output.checks != "none") {
    say(opt, std::string("checks (") + cfg.output.checks + "): " + (checks_passed ? "passed" : "FAILED"));
  }
  if (trace.failed) {
    std::cerr << "simulation aborted at step " << trace.size() - 1 << ": " << trace.failure << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_compare_appendix_a(const CommandOptions& opt) {
  const ScenarioConfig cfg = load_config(opt.config);
  auto [a, b] = plant_matrices(cfg);
  const ControlAffineSystem sys = build_system(cfg);
  Matrix q = Matrix::Identity(a.rows(), a.rows());
  for (const TaskConfig& t : cfg.tasks) {
    if (t.type == "lqr") q = t.q;
  }
  const Matrix p = riccati_solve(a, b, q, Matrix::Identity(b.cols(), b.cols()));
  const std::string dir = output_dir(cfg, opt);
  const Vector& x0 = cfg.simulation.x0;

  std::ostringstream pm;
  pm << "P = " << p.format(Eigen::IOFormat(Eigen::FullPrecision, Eigen::DontAlignCols, ", ", "; ", "", "", "[", "]"));
  say(opt, pm.str());

  if (opt.sweep) {
    if (!cfg.learning) throw ValidationError("config: 'learning' section is missing");
    std::ofstream csv((fs::path(dir) / "sweep.csv").string());
    csv << "resolution,sweeps,deviation,deviation_own\n";
    say(opt, "resolution  deviation(along optimal)  deviation(own loop)");
    double previous = std::numeric_limits<double>::infinity();
    bool monotone = true;
    for (int res : {21, 41, 81}) {
      ScenarioConfig c = cfg;
      c.learning->resolution.assign(a.rows(), res);
      LearningProblem prob = build_learning(c);
      const ValueIterationResult r = value_iteration(prob.system, prob.stage_cost, prob.vi);
      auto learned = std::make_shared<GridProvider>(shift_to_zero(r.value, prob.vi.goal));
      const ControllerComparison cmp = compare_controllers(sys, b, p, q, learned, x0,
                                                           cfg.simulation.horizon, cfg.simulation.dt);
      monotone = monotone && cmp.deviation_learned < previous;
      previous = cmp.deviation_learned;
      csv << res << ',' << r.sweeps << ',' << cmp.deviation_learned << ','
          << cmp.deviation_learned_own << '\n';
      std::ostringstream line;
      line << std::setw(10) << res << "  " << std::setw(24) << cmp.deviation_learned << "  "
           << std::setw(19) << cmp.deviation_learned_own;
      say(opt, line.str());
    }
    say(opt, std::string("deviation decreases with resolution: ") + (monotone ? "yes" : "no"));
    return kExitOk;
  }

  const std::string grid_path = (fs::path(dir) / cfg.output.grid).string();
  if (!fs::exists(grid_path)) {
    throw ValidationError("grid artifact '" + grid_path + "' not found; run `clfstack learn --config " +
                          opt.config + (opt.out.empty() ? "" : " --out " + opt.out) + "` first");
  }
  auto learned = std::make_shared<GridProvider>(load_grid(grid_path));
  const ControllerComparison cmp = compare_controllers(sys, b, p, q, learned, x0,
                                                       cfg.simulation.horizon, cfg.simulation.dt);
  std::ostringstream table;
  table << "controller pair                       max |du|\n"
        << "(a) optimal vs (b) min-norm x'Px      " << cmp.deviation_quad << '\n'
        << "(a) optimal vs (c) min-norm learned   " << cmp.deviation_learned << '\n'
        << "(a) vs (c), each in its own loop      " << cmp.deviation_learned_own;
  say(opt, table.str());

  const std::string csv_path = (fs::path(dir) / "compare.csv").string();
  {
    std::ofstream csv(csv_path);
    csv << std::setprecision(std::numeric_limits<double>::max_digits10);
    csv << "t";
    for (int i = 1; i <= a.rows(); ++i) csv << ",x_" << i;
    csv << ",u_optimal,u_minnorm_quadratic,u_minnorm_learned,u_learned_own_loop\n";
    for (std::size_t k = 0; k < cmp.t.size(); ++k) {
      csv << cmp.t[k];
      for (Eigen::Index i = 0; i < cmp.x_opt[k].size(); ++i) csv << ',' << cmp.x_opt[k][i];
      csv << ',' << cmp.u_opt[k][0] << ',' << cmp.u_quad[k][0] << ',' << cmp.u_learned[k][0] << ','
          << cmp.u_learned_own[k][0] << '\n';
    }
  }
  say(opt, "wrote " + csv_path);
  if (cfg.output.plot && !opt.no_plot) {
    Chart c;
    c.title = "Optimal, min-norm and learned controllers";
    c.xlabel = "t [s]";
    c.ylabel = "u";
    auto column = [](const std::vector<Vector>& v) {
      std::vector<double> out;
      for (const Vector& e : v) out.push_back(e[0]);
      return out;
    };
    c.series.push_back({"(a) optimal", cmp.t, column(cmp.u_opt)});
    c.series.push_back({"(b) min-norm x'Px", cmp.t, column(cmp.u_quad_own), true});
    c.series.push_back({"(c) min-norm learned", cmp.t, column(cmp.u_learned_own)});
    const std::string svg = (fs::path(dir) / "compare.svg").string();
    save_svg(svg, c);
    say(opt, "wrote " + svg);
  }
  return kExitOk;
}

int cmd_verify(const CommandOptions& opt) {
  VerifyOptions vo;
  vo.seed = opt.seed;
  vo.scenario_dir = opt.scenario_dir;
  const SuiteReport report = run_suite(opt.suite, vo);
  write_report_json(std::cout, report);
  if (!opt.quiet) {
    int failed = 0;
    for (const CheckResult& c : report.checks) failed += !c.passed;
    std::cerr << report.checks.size() - failed << "/" << report.checks.size()
              << " checks passed in suite '" << report.suite << "'\n";
  }
  return report.passed() ? kExitOk : kExitNumerical;
}

int cmd_plot(const CommandOptions& opt) {
  if (opt.trace.empty()) throw ValidationError("plot: --trace is required");
  const SimulationTrace trace = load_trace_csv(opt.trace);
  std::string dir = opt.out;
  std::vector<std::string> written;
  if (!opt.config.empty()) {
    ScenarioConfig cfg = load_config(opt.config);
    SimulationTrace named = trace;
    if (named.task_ids.size() == cfg.tasks.size()) {
      for (std::size_t i = 0; i < cfg.tasks.size(); ++i) named.task_ids[i] = cfg.tasks[i].id;
    }
    if (dir.empty()) dir = resolve_path(cfg, cfg.output.dir);
    fs::create_directories(dir);
    emit_plots(cfg, named, dir, written);
  } else {
    if (dir.empty()) dir = fs::path(opt.trace).parent_path().string();
    if (dir.empty()) dir = ".";
    fs::create_directories(dir);
    const std::string values = (fs::path(dir) / "values.svg").string();
    save_svg(values, value_chart(trace, {}));
    const std::string states = (fs::path(dir) / "states.svg").string();
    save_svg(states, state_chart(trace));
    written = {values, states};
  }
  for (const std::string& w : written) say(opt, "wrote " + w);
  return kExitOk;
}

}  // namespace clfstack
