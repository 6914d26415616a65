#include "clfstack/clf.hpp"

#include <algorithm>
#include <cmath>

namespace clfstack {

void ClfParams::validate() const {
  require(gradient_epsilon > 0.0, "gradient epsilon must be positive");
  require(lambda_min > 0.0, "lambda_min must be positive");
  require(lambda_min <= lambda_max, "lambda_min must not exceed lambda_max");
}

CLFContext::CLFContext(ProviderPtr provider_, ControlAffineSystem system_,
                       ClfParams params_)
    : provider(std::move(provider_)),
      system(std::move(system_)),
      params(params_) {
  require(provider != nullptr, "CLF context needs a value function");
  require(provider->dim() == system.state_dim(),
          "value function dimension must equal the system state dimension");
  params.validate();
}

LieDerivatives lie_derivatives(const CLFContext& ctx, const Vector& x) {
  const Vector grad = ctx.provider->gradient(x);
  LieDerivatives lie;
  lie.lf0 = grad.dot(ctx.system.drift(x));
  lie.lf1 = grad.transpose() * ctx.system.input_matrix(x);
  return lie;
}

double sigma(const LieDerivatives& lie, double stage_cost) {
  require(stage_cost >= 0.0, "stage cost must be nonnegative");
  const double radicand = lie.lf0 * lie.lf0 + stage_cost * lie.lf1.squaredNorm();
  require(radicand >= 0.0, "sigma radicand is negative");
  return std::sqrt(radicand);
}

double sigma(const CLFContext& ctx, const Vector& x) {
  return sigma(lie_derivatives(ctx, x), ctx.provider->stage_cost(x));
}

namespace {

// v(x) evaluated without cancellation: for L_f0 V < 0 the numerator
// L_f0 V + sigma equals q |L_f1 V|^2 / (sigma - L_f0 V).
double gain(const LieDerivatives& lie, double q, double s) {
  const double norm2 = lie.lf1.squaredNorm();
  if (lie.lf0 < 0.0) return q / (s - lie.lf0);
  return (lie.lf0 + s) / norm2;
}

}  // namespace

double sontag_gain(const LieDerivatives& lie, double stage_cost) {
  require(lie.lf1.squaredNorm() > 0.0, "sontag gain needs a nonzero L_f1 V");
  return gain(lie, stage_cost, sigma(lie, stage_cost));
}

double sontag_gain(const CLFContext& ctx, const Vector& x) {
  const LieDerivatives lie = lie_derivatives(ctx, x);
  if (lie.lf1.norm() <= ctx.params.gradient_epsilon) return 0.0;
  const double q = ctx.provider->stage_cost(x);
  return gain(lie, q, sigma(lie, q));
}

Vector sontag_control(const CLFContext& ctx, const Vector& x) {
  const LieDerivatives lie = lie_derivatives(ctx, x);
  if (lie.lf1.norm() <= ctx.params.gradient_epsilon) {
    return Vector::Zero(ctx.system.input_dim());
  }
  const double q = ctx.provider->stage_cost(x);
  return -gain(lie, q, sigma(lie, q)) * lie.lf1.transpose();
}

double lambda_scale(const CLFContext& ctx, const Vector& x) {
  const LieDerivatives lie = lie_derivatives(ctx, x);
  if (lie.lf1.norm() <= ctx.params.gradient_epsilon) return 1.0;
  const double q = ctx.provider->stage_cost(x);
  return std::clamp(2.0 * gain(lie, q, sigma(lie, q)), ctx.params.lambda_min,
                    ctx.params.lambda_max);
}

double clf_residual(const CLFContext& ctx, const Vector& x, const Vector& u,
                    MarginMode margin) {
  require(u.size() == ctx.system.input_dim(), "input dimension mismatch");
  const LieDerivatives lie = lie_derivatives(ctx, x);
  const double m = margin.kind == MarginMode::Kind::sigma
                       ? sigma(lie, ctx.provider->stage_cost(x))
                       : margin.alpha * ctx.provider->value(x);
  return lie.lf0 + lie.lf1.dot(u) + m;
}

MinNormResult min_norm_control(const CLFContext& ctx, const Vector& x,
                               const QPOptions& options) {
  const int m = ctx.system.input_dim();
  const LieDerivatives lie = lie_derivatives(ctx, x);
  MinNormResult out;
  out.singular = lie.lf1.norm() <= ctx.params.gradient_epsilon;
  Matrix a(out.singular ? 0 : 1, m);
  Vector b(out.singular ? 0 : 1);
  if (!out.singular) {
    a.row(0) = lie.lf1;
    b[0] = -sigma(lie, ctx.provider->stage_cost(x)) - lie.lf0;
  }
  const QPProblem problem(2.0 * Matrix::Identity(m, m), Vector::Zero(m), a, b);
  out.solution = solve_qp(problem, options);
  out.u = out.solution.z;
  return out;
}

}  // namespace clfstack
