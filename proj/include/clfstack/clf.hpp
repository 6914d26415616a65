#pragma once

#include "clfstack/common.hpp"
#include "clfstack/dynamics.hpp"
#include "clfstack/qp.hpp"
#include "clfstack/valuefn.hpp"

namespace clfstack {

struct ClfParams {
  /// |L_f1 V| at or below this is treated as a zero gradient.
  double gradient_epsilon = 1e-8;
  double lambda_min = 1e-3;
  double lambda_max = 1e3;

  void validate() const;
};

/// A value function used as a control Lyapunov function for a system. The
/// provider must be defined on the full state of the system.
struct CLFContext {
  ProviderPtr provider;
  ControlAffineSystem system;
  ClfParams params;

  CLFContext(ProviderPtr provider, ControlAffineSystem system,
             ClfParams params = {});
};

struct LieDerivatives {
  double lf0 = 0.0;   // grad V . f0
  RowVector lf1;      // grad V' f1, length m
};

LieDerivatives lie_derivatives(const CLFContext& ctx, const Vector& x);

/// sqrt( (L_f0 V)^2 + q(x) |L_f1 V|^2 )
double sigma(const CLFContext& ctx, const Vector& x);
double sigma(const LieDerivatives& lie, double stage_cost);

/// v(x) = (L_f0 V + sigma) / |L_f1 V|^2, or 0 when the gradient is singular.
double sontag_gain(const CLFContext& ctx, const Vector& x);
/// v from precomputed Lie derivatives and q; requires a nonzero L_f1 V.
double sontag_gain(const LieDerivatives& lie, double stage_cost);

/// u = -v(x) (L_f1 V)'  if |L_f1 V| > eps,  else 0.
Vector sontag_control(const CLFContext& ctx, const Vector& x);

/// lambda(x) = clamp(2 v(x), lambda_min, lambda_max), or 1 when singular.
double lambda_scale(const CLFContext& ctx, const Vector& x);

/// Decrease margin added to the Lie derivative in the CLF condition:
/// either sigma(x) or a linear class-K term alpha V(x).
struct MarginMode {
  enum class Kind { sigma, class_k };
  Kind kind = Kind::sigma;
  double alpha = 1.0;

  static MarginMode sigma_margin() { return {}; }
  static MarginMode class_k(double alpha) { return {Kind::class_k, alpha}; }
};

/// L_f0 V + L_f1 V u + margin. Nonpositive when the condition holds.
double clf_residual(const CLFContext& ctx, const Vector& x, const Vector& u,
                    MarginMode margin = {});

struct MinNormResult {
  Vector u;
  QPSolution solution;
  bool singular = false;
};

/// Pointwise min-norm controller: min |u|^2 s.t. L_f0 V + L_f1 V u <= -sigma,
/// solved with solve_qp. With a singular gradient the row is dropped and u=0.
MinNormResult min_norm_control(const CLFContext& ctx, const Vector& x,
                               const QPOptions& options = {});

}  // namespace clfstack
