#include "clfstack/stack.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace clfstack {
namespace {

const std::vector<std::string> kIds{"T1", "T2", "T3", "T4"};

TEST(BuildK, SignPatternPerRelation) {
  const PrioritizationMatrix k =
      build_K({{"T2", "T1", 0.05}, {"T1", "T3", 0.1}}, kIds);
  ASSERT_EQ(k.rows(), 2);
  ASSERT_EQ(k.tasks(), 4);
  Matrix expected(2, 4);
  expected << 0.05, -1.0, 0.0, 0.0,
              -1.0, 0.0, 0.1, 0.0;
  EXPECT_EQ(k.k, expected);
}

TEST(BuildK, EmptyRelations) {
  const PrioritizationMatrix k = build_K({}, kIds);
  EXPECT_EQ(k.rows(), 0);
  EXPECT_EQ(k.tasks(), 4);
}

TEST(BuildK, Rejections) {
  EXPECT_THROW(build_K({{"T1", "T9", 0.05}}, kIds), ValidationError);
  EXPECT_THROW(build_K({{"T1", "T1", 0.05}}, kIds), ValidationError);
  EXPECT_THROW(build_K({{"T1", "T2", 0.0}}, kIds), ValidationError);
  EXPECT_THROW(build_K({{"T1", "T2", 0.6}}, kIds), ValidationError);
}

TEST(Schedule, SegmentLookupIsHalfOpen) {
  PrioritySchedule s{{{0.0, 1.0, {}}, {1.0, 2.5, {}}}};
  EXPECT_NO_THROW(s.validate(2.5));
  EXPECT_EQ(s.segment_at(0.0), 0);
  EXPECT_EQ(s.segment_at(0.999), 0);
  EXPECT_EQ(s.segment_at(1.0), 1);
  EXPECT_EQ(s.segment_at(2.5), 1);
  EXPECT_EQ(s.segment_at(2.6), -1);
}

TEST(Schedule, RejectsGapsAndShortCoverage) {
  PrioritySchedule gap{{{0.0, 1.0, {}}, {1.5, 2.0, {}}}};
  EXPECT_THROW(gap.validate(2.0), ValidationError);
  PrioritySchedule late{{{0.5, 2.0, {}}}};
  EXPECT_THROW(late.validate(2.0), ValidationError);
  EXPECT_THROW(constant_schedule({}, 3.0).validate(4.0), ValidationError);
}

TEST(EnsembleProvider, EmbedsSingleRobotTask) {
  TaskSpec task{"g", goto_goal_provider(Eigen::Vector2d(1.0, 0.0), 1.0), RobotBlock{1, 2}, {}};
  const ProviderPtr p = ensemble_provider(task, 6);
  Vector x = Vector::Zero(6);
  x.segment<2>(2) << 3.0, 0.0;
  EXPECT_DOUBLE_EQ(p->value(x), 4.0);
  Vector expected = Vector::Zero(6);
  expected[2] = 4.0;
  EXPECT_TRUE(p->gradient(x).isApprox(expected));
}

TEST(AssembleQp, RowsFollowTheDefinition) {
  // Two goto tasks on one planar robot; lambda = 1 for goto tasks.
  const Vector g1 = Eigen::Vector2d(-1, 0), g2 = Eigen::Vector2d(1, 0);
  std::vector<TaskSpec> tasks{{"A", goto_goal_provider(g1, 1.0), std::nullopt, {}},
                              {"B", goto_goal_provider(g2, 4.0), std::nullopt, {}}};
  const ControlAffineSystem si = make_single_integrator(1, 2);
  const PrioritizationMatrix k = build_K({{"A", "B", 0.05}}, {"A", "B"});
  const Vector x = Eigen::Vector2d(0.0, 2.0);
  const AssembledQP qp = assemble_qp(tasks, si, x, k, 3.0);

  ASSERT_EQ(qp.problem.variables(), 4);
  ASSERT_EQ(qp.problem.rows(), 3);
  Matrix h = Matrix::Zero(4, 4);
  h.diagonal() << 2, 2, 6, 6;
  EXPECT_EQ(qp.problem.hessian, h);

  const Vector grad_a = 2.0 * (x - g1), grad_b = 2.0 * 2.0 * (x - g2);
  const double sig_a = 2.0 * 1.0 * (x - g1).squaredNorm();
  const double sig_b = 2.0 * 4.0 * (x - g2).squaredNorm();
  EXPECT_NEAR(qp.lambda[0], 1.0, 1e-14);
  EXPECT_NEAR(qp.lambda[1], 1.0, 1e-14);
  EXPECT_TRUE(qp.problem.constraints.block(0, 0, 1, 2).transpose().isApprox(grad_a));
  EXPECT_TRUE(qp.problem.constraints.block(1, 0, 1, 2).transpose().isApprox(grad_b));
  EXPECT_EQ(qp.problem.constraints(0, 2), -1.0);
  EXPECT_EQ(qp.problem.constraints(1, 3), -1.0);
  EXPECT_NEAR(qp.problem.bounds[0], -sig_a, 1e-12);
  EXPECT_NEAR(qp.problem.bounds[1], -sig_b, 1e-12);
  // -K delta <= 0 with K = [-1, 0.05]
  EXPECT_EQ(qp.problem.constraints(2, 2), 1.0);
  EXPECT_EQ(qp.problem.constraints(2, 3), -0.05);
  EXPECT_EQ(qp.problem.bounds[2], 0.0);
  EXPECT_EQ(qp.priority_row_offset, 2);
}

TEST(AssembleQp, SingularTaskIsDropped) {
  const Vector g = Eigen::Vector2d(0.5, 0.5);
  std::vector<TaskSpec> tasks{{"A", goto_goal_provider(g, 1.0), std::nullopt, {}},
                              {"B", goto_goal_provider(Eigen::Vector2d::Zero(), 1.0), std::nullopt, {}}};
  const AssembledQP qp = assemble_qp(tasks, make_single_integrator(1, 2), g,
                                     build_K({}, {"A", "B"}), 1.0);
  EXPECT_TRUE(qp.singular[0]);
  EXPECT_FALSE(qp.singular[1]);
  EXPECT_EQ(qp.task_row[0], -1);
  EXPECT_EQ(qp.task_row[1], 0);
  EXPECT_EQ(qp.problem.rows(), 1);
}

TEST(AssembleQp, LargeKappaRecoversSontagForOneTask) {
  const Vector goal = Eigen::Vector2d(1.0, 2.0);
  std::vector<TaskSpec> tasks{{"A", goto_goal_provider(goal, 2.0), std::nullopt, {}}};
  const Vector x = Eigen::Vector2d(-0.5, 0.3);
  const AssembledQP qp =
      assemble_qp(tasks, make_single_integrator(1, 2), x, build_K({}, {"A"}), 1e9);
  const QPSolution s = solve_qp(qp.problem);
  ASSERT_EQ(s.status, QPStatus::optimal);
  EXPECT_LT((s.z.head(2) + std::sqrt(2.0) * (x - goal)).norm(), 1e-6);
  EXPECT_LT(qp.task_residuals(s.z).maxCoeff(), 1e-9);
}

}  // namespace
}  // namespace clfstack
