#include "clfstack/sim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace clfstack {
namespace {

Scenario single_goto(double c, double kappa, double horizon) {
  std::vector<TaskSpec> tasks{{"A", goto_goal_provider(Eigen::Vector2d(1.0, -1.0), c), std::nullopt, {}}};
  ControllerParams params;
  params.kappa = kappa;
  return Scenario{make_single_integrator(1, 2), tasks, constant_schedule({}, horizon), horizon, 0.01,
                  Eigen::Vector2d(-1.0, 2.0), params};
}

TEST(Run, GoToGoalDecaysGeometrically) {
  // With kappa -> infinity the stack is the Sontag controller,
  // u = -sqrt(c)(x - g). Held over a step of a single integrator this gives
  // x_{k+1} - g = (1 - sqrt(c) dt)(x_k - g), so J_k = J_0 (1 - sqrt(c) dt)^{2k}.
  const double c = 1.0;
  const SimulationTrace tr = run(single_goto(c, 1e8, 2.0));
  ASSERT_FALSE(tr.failed) << tr.failure;
  ASSERT_EQ(tr.size(), 201u);
  const double j0 = tr.records.front().values[0];
  for (std::size_t k = 0; k < tr.size(); k += 20) {
    const double expected = j0 * std::pow(1.0 - std::sqrt(c) * 0.01, 2.0 * static_cast<double>(k));
    EXPECT_NEAR(tr.records[k].values[0], expected, 1e-6 * j0) << "step " << k;
  }
}

TEST(Run, IsDeterministic) {
  const Scenario s = single_goto(2.0, 10.0, 1.0);
  const SimulationTrace a = run(s), b = run(s);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a.records[k].x, b.records[k].x);
    EXPECT_EQ(a.records[k].u, b.records[k].u);
  }
}

TEST(Run, LowerTaskConvergesToScaledHigherTask) {
  std::vector<TaskSpec> tasks{
      {"T1", goto_goal_provider(Eigen::Vector2d(-1.0, 0.0), 1.0), std::nullopt, {}},
      {"T2", goto_goal_provider(Eigen::Vector2d(1.0, 0.0), 1.0), std::nullopt, {}}};
  const std::vector<PriorityRelation> rel{{"T1", "T2", 0.05}};
  ControllerParams params;
  params.kappa = 1.0;
  const Scenario s{make_single_integrator(1, 2), tasks, constant_schedule(rel, 15.0), 15.0, 0.01,
                   Eigen::Vector2d(0.0, 2.0), params};
  const SimulationTrace tr = run(s);
  ASSERT_FALSE(tr.failed);
  const NullspaceReport ns = check_nullspace_convergence(tr, build_K(rel, s.task_ids()), 0.05);
  EXPECT_TRUE(ns.converged);
  EXPECT_LT(ns.ratio, 0.05);
  // Every step satisfies the priority row and the task rows.
  for (const StepRecord& r : tr.records) {
    EXPECT_GE(-r.delta[0] + 0.05 * r.delta[1], -1e-7);
    EXPECT_LE(r.residual.maxCoeff(), 1e-7);
  }
}

TEST(Run, ValidatesScenario) {
  Scenario s = single_goto(1.0, 1.0, 1.0);
  s.dt = 0.3;  // 1 / 0.3 is not an integer
  EXPECT_THROW(s.validate(), ValidationError);
  s = single_goto(1.0, 1.0, 1.0);
  s.x0 = Eigen::Vector3d::Zero();
  EXPECT_THROW(s.validate(), ValidationError);
}

TEST(TraceCsv, RoundTrip) {
  const SimulationTrace tr = run(single_goto(1.0, 5.0, 0.2));
  std::stringstream ss;
  write_trace_csv(ss, tr);
  const std::string header = ss.str().substr(0, ss.str().find('\n'));
  EXPECT_EQ(header, "t,x_1,x_2,u_1,u_2,J_1,delta_1,residual_1,status,iters,solve_time_s");
  const SimulationTrace back = read_trace_csv(ss);
  ASSERT_EQ(back.size(), tr.size());
  EXPECT_EQ(back.state_dim, 2);
  EXPECT_EQ(back.input_dim, 2);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    EXPECT_EQ(back.records[k].t, tr.records[k].t);
    EXPECT_EQ(back.records[k].x, tr.records[k].x);
    EXPECT_EQ(back.records[k].u, tr.records[k].u);
    EXPECT_EQ(back.records[k].values, tr.records[k].values);
    EXPECT_EQ(back.records[k].delta, tr.records[k].delta);
    EXPECT_EQ(back.records[k].status, tr.records[k].status);
  }
}

TEST(TraceCsv, ReadsSubnormalValues) {
  std::stringstream ss("t,x_1,u_1,J_1,delta_1,residual_1,status,iters,solve_time_s\n"
                       "0,1e-310,0,2.5e-320,0,-4e-315,optimal,3,1e-5\n");
  const SimulationTrace tr = read_trace_csv(ss);
  ASSERT_EQ(tr.size(), 1u);
  EXPECT_EQ(tr.records[0].x[0], 1e-310);
  EXPECT_EQ(tr.records[0].values[0], 2.5e-320);
  EXPECT_EQ(tr.records[0].iterations, 3);
}

TEST(TraceCsv, RejectsMalformedCells) {
  std::stringstream ss("t,x_1,u_1,J_1,delta_1,residual_1,status,iters,solve_time_s\n"
                       "0,1x,0,0,0,0,optimal,3,1e-5\n");
  EXPECT_THROW(read_trace_csv(ss), ValidationError);
}

// A trace whose value series are given directly.
SimulationTrace synthetic(const std::vector<std::vector<double>>& series, double dt) {
  SimulationTrace tr;
  for (std::size_t i = 0; i < series.size(); ++i) tr.task_ids.push_back("T" + std::to_string(i + 1));
  for (std::size_t k = 0; k < series[0].size(); ++k) {
    StepRecord r;
    r.t = static_cast<double>(k) * dt;
    r.values.resize(static_cast<Eigen::Index>(series.size()));
    for (std::size_t i = 0; i < series.size(); ++i) r.values[static_cast<Eigen::Index>(i)] = series[i][k];
    tr.records.push_back(r);
  }
  return tr;
}

TEST(PhaseReport, StatsAndExpectations) {
  // Two segments over t = 0..4 with dt = 1, switching at t = 2.
  const SimulationTrace tr = synthetic({{10, 5, 1, 2, 3}, {1, 2, 4, 2, 0.1}}, 1.0);
  PrioritySchedule sched{{{0.0, 2.0, {}}, {2.0, 4.0, {}}}};
  std::vector<PhaseExpectation> ex(3);
  ex[0] = {0, 0, PhaseExpectation::Kind::driven_to_zero};
  ex[0].fraction = 0.1;  // 1 <= 0.1 * 10
  ex[1] = {0, 1, PhaseExpectation::Kind::increases};
  ex[2] = {1, 1, PhaseExpectation::Kind::driven_to_zero, PhaseExpectation::Reference::running_peak};
  ex[2].fraction = 0.05;  // 0.1 <= 0.05 * 4
  const PhaseReport rep = phase_report(tr, sched, ex);
  ASSERT_EQ(rep.stats.size(), 2u);
  EXPECT_EQ(rep.stats[0][0].start, 10);
  EXPECT_EQ(rep.stats[0][0].end, 1);
  EXPECT_EQ(rep.stats[1][0].start, 1);
  EXPECT_EQ(rep.stats[1][0].end, 3);
  EXPECT_EQ(rep.stats[1][0].max, 3);
  EXPECT_DOUBLE_EQ(rep.stats[0][0].nonincreasing_fraction, 1.0);
  ASSERT_EQ(rep.results.size(), 3u);
  EXPECT_TRUE(rep.results[0].passed);
  EXPECT_TRUE(rep.results[1].passed);
  EXPECT_TRUE(rep.results[2].passed);
  EXPECT_NEAR(rep.results[2].limit, 0.2, 1e-15);
  EXPECT_TRUE(rep.all_passed());

  ex[2].fraction = 0.01;
  EXPECT_FALSE(phase_report(tr, sched, ex).all_passed());
}

TEST(PhaseReport, BoundedAway) {
  const SimulationTrace tr = synthetic({{1, 1, 1, 2, 3, 4}}, 1.0);
  PrioritySchedule sched{{{0.0, 2.0, {}}, {2.0, 5.0, {}}}};
  PhaseExpectation e{1, 0, PhaseExpectation::Kind::bounded_away};
  e.window = 1.0;  // min over t in [4, 5] is 3 > 10 * 0.05 * 1
  EXPECT_TRUE(phase_report(tr, sched, {e}).all_passed());
  e.factor = 100.0;  // 3 > 5 fails
  EXPECT_FALSE(phase_report(tr, sched, {e}).all_passed());
}

TEST(Nullspace, RatioOfSyntheticSeries) {
  const SimulationTrace tr = synthetic({{1.0, 1.0, 1.0}, {40.0, 30.0, 20.4}}, 1.0);
  const PrioritizationMatrix k = build_K({{"T1", "T2", 0.05}}, tr.task_ids);
  const NullspaceReport ns = check_nullspace_convergence(tr, k, 0.05);
  EXPECT_NEAR(ns.initial, 1.0, 1e-12);
  EXPECT_NEAR(ns.final_value, 0.02, 1e-12);
  EXPECT_NEAR(ns.ratio, 0.02, 1e-12);
  EXPECT_TRUE(ns.converged);
}

}  // namespace
}  // namespace clfstack
