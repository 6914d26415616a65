#include "clfstack/clf.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace clfstack {
namespace {

TEST(Clf, SontagOnGoToGoalIsTheOptimalFeedback) {
  // sigma = 2 c d^2 and |L_f1 V|^2 = 4 c d^2, so v = 1/2 and
  // u = -(1/2) grad J = -sqrt(c) (x - g).
  const double c = 2.5;
  const Vector goal = Eigen::Vector2d(1.0, -0.5);
  CLFContext ctx(goto_goal_provider(goal, c), make_single_integrator(1, 2));
  const Vector x = Eigen::Vector2d(-0.3, 0.9);
  const double d2 = (x - goal).squaredNorm();
  EXPECT_NEAR(sigma(ctx, x), 2.0 * c * d2, 1e-12);
  EXPECT_NEAR(sontag_gain(ctx, x), 0.5, 1e-14);
  EXPECT_NEAR(lambda_scale(ctx, x), 1.0, 1e-14);
  EXPECT_TRUE(sontag_control(ctx, x).isApprox(-std::sqrt(c) * (x - goal)));
}

TEST(Clf, MinNormMatchesLqrForDoubleIntegrator) {
  const double s3 = std::sqrt(3.0);
  Matrix p(2, 2);
  p << s3, 1, 1, s3;
  auto v = std::make_shared<QuadraticProvider>(p, Matrix::Identity(2, 2));
  CLFContext ctx(v, make_double_integrator());
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(-2, 2);
  for (int k = 0; k < 50; ++k) {
    const Eigen::Vector2d x(d(rng), d(rng));
    const double u_star = -(x[0] + s3 * x[1]);  // -B'P x
    const MinNormResult r = min_norm_control(ctx, x);
    ASSERT_FALSE(r.singular);
    EXPECT_NEAR(r.u[0], u_star, 1e-9 * (1.0 + std::abs(u_star)));
    EXPECT_NEAR(sontag_control(ctx, x)[0], u_star, 1e-9 * (1.0 + std::abs(u_star)));
  }
}

TEST(Clf, ConstraintIsActiveWheneverGradientIsNonzero) {
  const Vector goal = Eigen::Vector2d(0.0, 0.0);
  CLFContext ctx(goto_goal_provider(goal, 1.0), make_single_integrator(1, 2));
  const Vector x = Eigen::Vector2d(0.5, 0.25);
  const MinNormResult r = min_norm_control(ctx, x);
  ASSERT_EQ(r.solution.active.size(), 1u);
  EXPECT_NEAR(clf_residual(ctx, x, r.u), 0.0, 1e-12);
}

TEST(Clf, SingularGradientGivesZeroInput) {
  const Vector goal = Eigen::Vector2d(1.0, 1.0);
  CLFContext ctx(goto_goal_provider(goal, 1.0), make_single_integrator(1, 2));
  const MinNormResult r = min_norm_control(ctx, goal);
  EXPECT_TRUE(r.singular);
  EXPECT_EQ(r.u, Vector::Zero(2));
  EXPECT_EQ(sontag_gain(ctx, goal), 0.0);
  EXPECT_EQ(lambda_scale(ctx, goal), 1.0);
}

TEST(Clf, LambdaIsClamped) {
  ClfParams params;
  params.lambda_min = 2.0;
  params.lambda_max = 3.0;
  CLFContext ctx(goto_goal_provider(Eigen::Vector2d::Zero(), 1.0), make_single_integrator(1, 2),
                 params);
  EXPECT_EQ(lambda_scale(ctx, Eigen::Vector2d(1.0, 0.0)), 2.0);
}

TEST(Clf, ClassKMargin) {
  CLFContext ctx(goto_goal_provider(Eigen::Vector2d::Zero(), 1.0), make_single_integrator(1, 2));
  const Vector x = Eigen::Vector2d(1.0, 0.0), u = Eigen::Vector2d(-0.25, 0.0);
  // L_f1 V u = 2 * -0.25 = -0.5, alpha V = 0.7
  EXPECT_NEAR(clf_residual(ctx, x, u, MarginMode::class_k(0.7)), 0.2, 1e-15);
}

TEST(Clf, ContextRejectsDimensionMismatch) {
  EXPECT_THROW(CLFContext(goto_goal_provider(Eigen::Vector3d::Zero(), 1.0),
                          make_single_integrator(1, 2)),
               ContractViolation);
  ClfParams bad;
  bad.lambda_max = 0.5 * bad.lambda_min;
  EXPECT_THROW(bad.validate(), ContractViolation);
}

}  // namespace
}  // namespace clfstack
