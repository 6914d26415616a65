#pragma once

#include "clfstack/common.hpp"

#include <memory>
#include <string>

namespace clfstack {

/// A task encoded by a nonnegative value function J(x) with J = 0 at the goal,
/// its gradient, and the state cost q(x) of the optimal-control problem
///   min  integral of q(x) + u'u  dt
/// that J solves (exactly or approximately). Implementations are immutable.
class ValueFunctionProvider {
 public:
  virtual ~ValueFunctionProvider() = default;

  /// Dimension of the state the provider is defined on.
  virtual int dim() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
  virtual double stage_cost(const Vector& x) const = 0;
  virtual std::string goal_descriptor() const = 0;
};

using ProviderPtr = std::shared_ptr<const ValueFunctionProvider>;

/// J(x) = sqrt(c) |x - goal|^2, the exact value function of a single
/// integrator with q(x) = c |x - goal|^2.
class GoToGoalProvider final : public ValueFunctionProvider {
 public:
  GoToGoalProvider(Vector goal, double c);

  int dim() const override { return static_cast<int>(goal_.size()); }
  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;
  double stage_cost(const Vector& x) const override;
  std::string goal_descriptor() const override;

  const Vector& goal() const { return goal_; }
  double weight() const { return c_; }

 private:
  Vector goal_;
  double c_;
};

/// J(x) = (x - center)' P (x - center) with q(x) = (x - center)' Q (x - center).
/// With P from riccati_solve this is the exact LQ value function.
class QuadraticProvider final : public ValueFunctionProvider {
 public:
  QuadraticProvider(Matrix p, Matrix q, Vector center);
  QuadraticProvider(Matrix p, Matrix q);

  int dim() const override { return static_cast<int>(p_.rows()); }
  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;
  double stage_cost(const Vector& x) const override;
  std::string goal_descriptor() const override;

  const Matrix& p() const { return p_; }

 private:
  Matrix p_;
  Matrix q_;
  Vector center_;
};

/// Desired inter-robot distances. W(i,j) = 0 means no edge.
struct FormationSpec {
  Matrix weights;
  int workspace_dim = 2;

  int robot_count() const { return static_cast<int>(weights.rows()); }
  bool is_neighbor(int i, int j) const { return weights(i, j) != 0.0; }
  /// Throws ContractViolation unless W is square, symmetric, zero-diagonal
  /// and nonnegative.
  void validate() const;
};

/// Six-robot hexagon: ring edges of length `side`, plus the long diagonals
/// (2 side) and the 1-3 chord (sqrt(3) side) that make the shape rigid.
FormationSpec hexagon_formation(double side);

/// Vertex k of the regular hexagon with the given side, robots ordered
/// counter-clockwise. Satisfies hexagon_formation(side) exactly.
Vector hexagon_vertices(double side, const Eigen::Vector2d& center = {0, 0});

/// E(x) = sum_i sum_{j in N_i} (|x_i - x_j|^2 - W_ij^2)^2.
/// Each undirected edge is visited from both endpoints, so it counts twice.
double formation_energy(const Vector& x, const FormationSpec& spec);

/// dE/dx under the same double-count convention:
///   dE/dx_i = sum_{j in N_i} 8 (|x_i - x_j|^2 - W_ij^2)(x_i - x_j).
Vector formation_energy_gradient(const Vector& x, const FormationSpec& spec);

/// J(x) = c_E E(x), q(x) = c_q E(x).
class FormationProvider final : public ValueFunctionProvider {
 public:
  FormationProvider(FormationSpec spec, double energy_weight,
                    double cost_weight);

  int dim() const override {
    return spec_.robot_count() * spec_.workspace_dim;
  }
  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;
  double stage_cost(const Vector& x) const override;
  std::string goal_descriptor() const override { return "formation"; }

  const FormationSpec& spec() const { return spec_; }

 private:
  FormationSpec spec_;
  double energy_weight_;
  double cost_weight_;
};

std::shared_ptr<const GoToGoalProvider> goto_goal_provider(const Vector& goal,
                                                           double c);
std::shared_ptr<const FormationProvider> formation_provider(
    const FormationSpec& spec, double energy_weight, double cost_weight = 0.01);

/// Stabilizing solution of A'P + PA - P B R^-1 B' P + Q = 0.
/// Throws NumericalError when the residual cannot be brought below 1e-10
/// (relative to the problem scale), e.g. for non-stabilizable (A, B).
Matrix riccati_solve(const Matrix& a, const Matrix& b, const Matrix& q,
                     const Matrix& r);

/// Frobenius norm of A'P + PA - P B R^-1 B' P + Q.
double riccati_residual(const Matrix& a, const Matrix& b, const Matrix& q,
                        const Matrix& r, const Matrix& p);

/// HJB residual L_f0 J - 1/4 |L_f1 J|^2 + q at x, given f0(x) and f1(x).
double hjb_residual(const ValueFunctionProvider& provider, const Vector& x,
                    const Vector& drift, const Matrix& input_matrix);

}  // namespace clfstack
