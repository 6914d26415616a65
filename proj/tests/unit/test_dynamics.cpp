#include "clfstack/dynamics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace clfstack {
namespace {

TEST(Dynamics, SingleIntegratorShapes) {
  const ControlAffineSystem si = make_single_integrator(3, 2);
  EXPECT_EQ(si.state_dim(), 6);
  EXPECT_EQ(si.input_dim(), 6);
  EXPECT_TRUE(si.driftless());
  const Vector x = Vector::LinSpaced(6, -1, 1);
  EXPECT_EQ(si.drift(x), Vector::Zero(6));
  EXPECT_EQ(si.input_matrix(x), Matrix::Identity(6, 6));
}

TEST(Dynamics, RK4IsExactForDoubleIntegrator) {
  // x(t) = x0 + v0 t + u t^2 / 2, v(t) = v0 + u t
  const ControlAffineSystem di = make_double_integrator();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int trial = 0; trial < 25; ++trial) {
    const double p = d(rng), v = d(rng), u = d(rng), dt = 0.01 + 0.05 * std::abs(d(rng));
    const Vector next = step_rk4(di, Eigen::Vector2d(p, v), Vector::Constant(1, u), dt);
    EXPECT_NEAR(next[0], p + v * dt + 0.5 * u * dt * dt, 1e-14);
    EXPECT_NEAR(next[1], v + u * dt, 1e-14);
  }
}

TEST(Dynamics, RK4MatchesScalarExponential) {
  // xdot = a x + b u has x(dt) = e^{a dt} x + (e^{a dt} - 1) b u / a.
  const double a = -0.7, b = 1.3, x0 = 0.9, u = -0.4;
  Matrix am(1, 1), bm(1, 1);
  am << a;
  bm << b;
  const ControlAffineSystem sys = make_linear_system(am, bm);
  for (double dt : {0.1, 0.05, 0.01}) {
    const double exact = std::exp(a * dt) * x0 + (std::exp(a * dt) - 1.0) * b * u / a;
    const double got = step_rk4(sys, Vector::Constant(1, x0), Vector::Constant(1, u), dt)[0];
    // Local error of RK4 is |a dt|^5 / 120 times the state scale.
    EXPECT_NEAR(got, exact, std::pow(std::abs(a) * dt, 5) / 60.0 + 1e-15);
  }
}

TEST(Dynamics, RK4LocalErrorIsFifthOrder) {
  ControlAffineSystem sys(
      1, 1, [](const Vector& x) { return Vector::Constant(1, -x[0] * x[0]); },
      [](const Vector&) { return Matrix::Identity(1, 1); }, "riccati_ode");
  // xdot = -x^2 has x(t) = x0 / (1 + x0 t).
  const double x0 = 1.5;
  auto err = [&](double dt) {
    return std::abs(step_rk4(sys, Vector::Constant(1, x0), Vector::Zero(1), dt)[0] -
                    x0 / (1.0 + x0 * dt));
  };
  const double ratio = err(0.02) / err(0.01);
  EXPECT_GT(ratio, 24.0);
  EXPECT_LT(ratio, 40.0);
}

TEST(Dynamics, EulerMap) {
  const DiscreteSystem d = discretize(make_double_integrator(), 0.1);
  const Vector next = d.map(Eigen::Vector2d(1.0, 2.0), Vector::Constant(1, -3.0));
  EXPECT_NEAR(next[0], 1.2, 1e-15);
  EXPECT_NEAR(next[1], 1.7, 1e-15);
}

TEST(Dynamics, RejectsBadShapes) {
  const ControlAffineSystem si = make_single_integrator(1, 2);
  EXPECT_THROW(si.drift(Vector::Zero(3)), ContractViolation);
  EXPECT_THROW(step_rk4(si, Vector::Zero(2), Vector::Zero(1), 0.1), ContractViolation);
  EXPECT_THROW(step_rk4(si, Vector::Zero(2), Vector::Zero(2), 0.0), ContractViolation);
  ControlAffineSystem wrong(
      2, 1, [](const Vector&) { return Vector::Zero(3); },
      [](const Vector&) { return Matrix::Zero(2, 1); }, "wrong");
  EXPECT_THROW(wrong.drift(Vector::Zero(2)), ContractViolation);
}

TEST(Dynamics, DriftlessClaimIsChecked) {
  auto drift = [](const Vector& x) { return Vector(0.1 * x); };
  auto g = [](const Vector&) { return Matrix::Identity(2, 2); };
  EXPECT_THROW(ControlAffineSystem(2, 2, drift, g, "not driftless", true), ContractViolation);
  EXPECT_NO_THROW(ControlAffineSystem(2, 2, drift, g, "with drift", false));
}

}  // namespace
}  // namespace clfstack
