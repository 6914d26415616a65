#pragma once

#include "clfstack/common.hpp"

#include <functional>
#include <string>

namespace clfstack {

/// Control-affine plant  xdot = f0(x) + f1(x) u.
///
/// Immutable after construction; drift and input_matrix are pure and may be
/// called concurrently. Both check the returned shapes against (n, m).
class ControlAffineSystem {
 public:
  using DriftFn = std::function<Vector(const Vector&)>;
  using InputMatrixFn = std::function<Matrix(const Vector&)>;

  /// A system constructed with `driftless = true` is probed at random states
  /// and rejected if f0 is not identically zero there.
  ControlAffineSystem(int state_dim, int input_dim, DriftFn drift,
                      InputMatrixFn input_matrix, std::string label,
                      bool driftless = false);

  int state_dim() const { return state_dim_; }
  int input_dim() const { return input_dim_; }
  const std::string& label() const { return label_; }
  bool driftless() const { return driftless_; }

  Vector drift(const Vector& x) const;
  Matrix input_matrix(const Vector& x) const;
  /// f0(x) + f1(x) u
  Vector field(const Vector& x, const Vector& u) const;

 private:
  int state_dim_;
  int input_dim_;
  DriftFn drift_;
  InputMatrixFn input_matrix_;
  std::string label_;
  bool driftless_;
};

/// Forward-Euler discretization  x_{k+1} = x_k + dt (f0(x_k) + f1(x_k) u_k).
struct DiscreteSystem {
  ControlAffineSystem base;
  double dt;

  Vector map(const Vector& x, const Vector& u) const;
};

/// N robots with xdot_i = u_i in R^d, stacked robot-major.
ControlAffineSystem make_single_integrator(int robot_count, int workspace_dim);

/// xdot = [[0,1],[0,0]] x + [0;1] u
ControlAffineSystem make_double_integrator();

/// xdot = A x + B u
ControlAffineSystem make_linear_system(const Matrix& a, const Matrix& b,
                                       std::string label = "linear");

/// One classical RK4 step with u held constant over the step.
Vector step_rk4(const ControlAffineSystem& sys, const Vector& x,
                const Vector& u, double dt);

DiscreteSystem discretize(const ControlAffineSystem& sys, double dt);

}  // namespace clfstack
