// Acceptance criteria 1-7. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include "clfstack/clf.hpp"
#include "clfstack/commands.hpp"
#include "clfstack/config.hpp"
#include "clfstack/grid.hpp"
#include "clfstack/qp.hpp"
#include "clfstack/sim.hpp"
#include "clfstack/stack.hpp"
#include "clfstack/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace clfstack;
using Clock = std::chrono::steady_clock;
using Rng = std::mt19937_64;

struct Outcome {
  bool passed = false;
  std::string detail;
};

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Matrix gaussian(Rng& rng, int r, int c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

std::string scenario(const char* name) { return std::string(CLFSTACK_SCENARIO_DIR) + "/" + name; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// P of the double integrator with Q = I, R = 1, solved by hand. The entries of
// A'P + PA - PBB'P + I = 0 read 1 - p12^2 = 0, p11 - p12 p22 = 0 and
// 2 p12 - p22^2 + 1 = 0, so p12 = 1, p22 = sqrt(3), p11 = sqrt(3).
Matrix hand_p() {
  const double s3 = std::sqrt(3.0);
  Matrix p(2, 2);
  p << s3, 1.0, 1.0, s3;
  return p;
}

Outcome ac1() {
  Matrix a(2, 2), b(2, 1);
  a << 0, 1, 0, 0;
  b << 0, 1;
  const Matrix p = riccati_solve(a, b, Matrix::Identity(2, 2), Matrix::Identity(1, 1));
  const double p_err = (p - hand_p()).norm();
  CLFContext ctx(std::make_shared<QuadraticProvider>(p, Matrix::Identity(2, 2)),
                 make_double_integrator());

  Rng rng(101);
  double worst_random = 0.0;
  int used = 0;
  while (used < 1000) {
    const Eigen::Vector2d x(uniform(rng, -2, 2), uniform(rng, -2, 2));
    if (lie_derivatives(ctx, x).lf1.norm() <= 1e-6) continue;
    ++used;
    const double u_star = -(b.transpose() * hand_p() * x)(0);
    worst_random = std::max(worst_random, std::abs(min_norm_control(ctx, x).u[0] - u_star));
  }

  double worst_traj = 0.0;
  Vector x = Eigen::Vector2d(1.0, 1.0);
  for (int k = 0; k <= 1000; ++k) {
    const MinNormResult r = min_norm_control(ctx, x);
    const double u_star = -(b.transpose() * hand_p() * x)(0);
    worst_traj = std::max(worst_traj, std::abs(r.u[0] - u_star));
    x = step_rk4(ctx.system, x, r.u, 0.01);
  }
  const bool ok = p_err < 1e-9 && worst_random <= 1e-6 && worst_traj <= 1e-6;
  return {ok, "|P - P_hand| " + fmt(p_err) + ", max |u - u*| random " + fmt(worst_random) +
                  ", trajectory " + fmt(worst_traj)};
}

Outcome ac2() {
  const ScenarioConfig cfg = load_config(scenario("double_integrator.json"));
  Matrix a(2, 2), b(2, 1);
  a << 0, 1, 0, 0;
  b << 0, 1;
  const Matrix p = hand_p();
  const ControlAffineSystem sys = make_double_integrator();

  std::vector<double> deviations;
  double median = 0.0;
  for (int res : {21, 41, 81}) {
    ScenarioConfig c = cfg;
    c.learning->resolution.assign(2, res);
    LearningProblem lp = build_learning(c);
    const ValueIterationResult r = value_iteration(lp.system, lp.stage_cost, lp.vi);
    auto learned = std::make_shared<GridProvider>(shift_to_zero(r.value, lp.vi.goal));
    if (res == 81) {
      std::vector<double> rel;
      const GridValueFunction& g = learned->grid();
      for (long i = 0; i < g.grid().node_count(); ++i) {
        const Vector xn = g.node_state(i);
        const double radius = xn.norm();
        if (radius < 0.3 || radius > 1.5) continue;
        const double exact = xn.dot(p * xn);
        rel.push_back(std::abs(learned->value(xn) - exact) / exact);
      }
      std::nth_element(rel.begin(), rel.begin() + rel.size() / 2, rel.end());
      median = rel[rel.size() / 2];
    }
    const ControllerComparison cmp = compare_controllers(sys, b, p, Matrix::Identity(2, 2), learned,
                                                         cfg.simulation.x0, cfg.simulation.horizon,
                                                         cfg.simulation.dt);
    deviations.push_back(cmp.deviation_learned);
  }
  const bool monotone = deviations[0] > deviations[1] && deviations[1] > deviations[2];
  return {median <= 0.10 && monotone,
          "median relative error " + fmt(median) + " (81x81), control deviation 21/41/81: " +
              fmt(deviations[0]) + " / " + fmt(deviations[1]) + " / " + fmt(deviations[2])};
}

Outcome ac3() {
  const int m = 12, tasks = 4;
  const double kappa = 10.0;
  const PrioritizationMatrix k =
      build_K({{"T1", "T2", 0.05}, {"T2", "T3", 0.05}, {"T3", "T4", 0.05}}, {"T1", "T2", "T3", "T4"});
  Rng rng(303);
  double worst = 0.0;
  int found = 0, drawn = 0;
  while (found < 100 && drawn < 100000) {
    ++drawn;
    const Matrix f1 = gaussian(rng, tasks, m);
    Vector f0(tasks), sigma(tasks);
    for (int i = 0; i < tasks; ++i) {
      f0[i] = uniform(rng, -1, 1);
      sigma[i] = uniform(rng, 0.1, 2);
    }
    // The stack QP written out directly: z = (u, delta).
    Matrix h = Matrix::Zero(m + tasks, m + tasks);
    h.diagonal() << Vector::Constant(m, 2.0), Vector::Constant(tasks, 2.0 * kappa);
    Matrix rows = Matrix::Zero(tasks + k.rows(), m + tasks);
    rows.topLeftCorner(tasks, m) = f1;
    rows.topRightCorner(tasks, tasks) = -Matrix::Identity(tasks, tasks);
    rows.bottomRightCorner(k.rows(), tasks) = -k.k;
    Vector bounds(tasks + k.rows());
    bounds << -(f0 + sigma), Vector::Zero(k.rows());
    const QPSolution s = solve_qp(QPProblem(h, Vector::Zero(m + tasks), rows, bounds));
    if (s.status != QPStatus::optimal || static_cast<int>(s.active.size()) != tasks + k.rows() ||
        s.duals.minCoeff() <= 1e-9) {
      continue;
    }
    ++found;
    const ClosedFormSolution cf = closed_form_all_active(f0, f1, sigma, k.k, kappa);
    worst = std::max({worst, (cf.u - s.z.head(m)).norm(), (cf.delta - s.z.tail(tasks)).norm()});
  }
  return {found == 100 && worst <= 1e-6,
          std::to_string(found) + " all-active instances (" + std::to_string(drawn) +
              " drawn), max |(u, delta) difference| " + fmt(worst)};
}

Outcome ac4() {
  Rng rng(404);
  double worst_residual = 0.0, worst_qp = 0.0;
  int used = 0;
  while (used < 1000) {
    std::unique_ptr<CLFContext> ctx;
    Vector x;
    switch (used % 3) {
      case 0: {
        const int d = 1 + used % 4;
        Vector goal(d);
        for (int i = 0; i < d; ++i) goal[i] = uniform(rng, -2, 2);
        ctx = std::make_unique<CLFContext>(goto_goal_provider(goal, uniform(rng, 0.1, 5)),
                                           make_single_integrator(1, d));
        x = Vector(d);
        for (int i = 0; i < d; ++i) x[i] = uniform(rng, -3, 3);
        break;
      }
      case 1: {
        const Matrix a = gaussian(rng, 3, 3), b = gaussian(rng, 3, 2);
        const Matrix l = gaussian(rng, 3, 3);
        const Matrix q = l * l.transpose() + 0.5 * Matrix::Identity(3, 3);
        const Matrix p = riccati_solve(a, b, q, Matrix::Identity(2, 2));
        ctx = std::make_unique<CLFContext>(std::make_shared<QuadraticProvider>(p, q),
                                           make_linear_system(a, b));
        x = gaussian(rng, 3, 1);
        break;
      }
      default: {
        ctx = std::make_unique<CLFContext>(formation_provider(hexagon_formation(1.0), 0.01, 0.01),
                                           make_single_integrator(6, 2));
        x = hexagon_vertices(1.0) + 0.5 * gaussian(rng, 12, 1);
        break;
      }
    }
    if (lie_derivatives(*ctx, x).lf1.norm() <= ctx->params.gradient_epsilon) continue;
    ++used;
    const Vector u = sontag_control(*ctx, x);
    worst_residual = std::max(worst_residual, std::abs(clf_residual(*ctx, x, u)));
    const MinNormResult r = min_norm_control(*ctx, x);
    worst_qp = std::max(worst_qp, (r.u - u).norm());
  }
  return {worst_residual <= 1e-9 && worst_qp <= 1e-8,
          "1000 samples, max |CLF residual| " + fmt(worst_residual) + ", max |u_qp - u_sontag| " +
              fmt(worst_qp)};
}

Outcome ac5() {
  const Scenario s = build_scenario(load_config(scenario("multirobot_hex.json")));
  const SimulationTrace tr = run(s);
  long optimal = 0;
  for (const StepRecord& r : tr.records) optimal += r.status == QPStatus::optimal;
  const long steps = std::lround(s.horizon / s.dt);
  const PhaseReport rep = phase_report(tr, s.schedule, three_phase_expectations());
  int passed = 0;
  std::string failed;
  for (const ExpectationResult& e : rep.results) {
    if (e.passed) ++passed;
    else failed += "; FAILED " + e.description;
  }
  const bool ok = !tr.failed && optimal == steps + 1 && rep.all_passed();
  return {ok, std::to_string(passed) + "/" + std::to_string(rep.results.size()) +
                  " phase checks, " + std::to_string(optimal) + " optimal solves over " +
                  std::to_string(steps) + " steps" + failed};
}

Outcome ac6() {
  const Scenario s = build_scenario(load_config(scenario("two_task_nullspace.json")));
  const SimulationTrace tr = run(s);
  const PrioritizationMatrix k = build_K(s.schedule.segments.front().relations, s.task_ids());
  const NullspaceReport ns = check_nullspace_convergence(tr, k, 0.05);
  const bool ok = !tr.failed && k.rows() == 1 && tr.records.back().t == 15.0 && ns.ratio <= 0.05;
  return {ok, "|K J| " + fmt(ns.initial) + " -> " + fmt(ns.final_value) + " at t = 15, ratio " +
                  fmt(ns.ratio)};
}

Outcome ac7() {
  VerifyOptions opt;
  opt.scenario_dir = CLFSTACK_SCENARIO_DIR;
  const SuiteReport rep = run_suite("all", opt);
  int passed = 0;
  std::string failed;
  for (const CheckResult& c : rep.checks) {
    if (c.passed) ++passed;
    else failed += "; FAILED " + c.suite + "/" + c.name;
  }
  return {rep.passed(), std::to_string(passed) + "/" + std::to_string(rep.checks.size()) +
                            " property checks" + failed};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    /// Runtime limit in seconds; 0 for none.
    double budget_s;
    std::function<Outcome()> body;
  };
  const std::vector<Criterion> criteria{
      {1, "min-norm equals optimal control for the double integrator", 1.0, ac1},
      {2, "value iteration fidelity and resolution convergence", 60.0, ac2},
      {3, "closed form matches the QP solver on all-active instances", 5.0, ac3},
      {4, "Sontag activity and min-norm equivalence", 0.0, ac4},
      {5, "three-phase formation / go-to-goal stack", 60.0, ac5},
      {6, "null-space convergence of a two-task stack", 5.0, ac6},
      {7, "property suites", 0.0, ac7},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    Outcome out;
    const auto t0 = Clock::now();
    try {
      out = c.body();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_time = c.budget_s <= 0.0 || secs < c.budget_s;
    const bool passed = out.passed && in_time;
    failures += !passed;
    char timing[64];
    if (c.budget_s > 0.0) {
      std::snprintf(timing, sizeof timing, "%.2f s, budget %.0f s%s", secs, c.budget_s,
                    in_time ? "" : ", over budget");
    } else {
      std::snprintf(timing, sizeof timing, "%.2f s", secs);
    }
    std::printf("%s AC%d %s: %s [%s]\n", passed ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(),
                timing);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
