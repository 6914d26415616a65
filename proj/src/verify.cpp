#include "clfstack/verify.hpp"

#include "clfstack/clf.hpp"
#include "clfstack/config.hpp"
#include "clfstack/grid.hpp"
#include "clfstack/qp.hpp"
#include "clfstack/sim.hpp"
#include "clfstack/stack.hpp"

#include <nlohmann/json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace clfstack {
namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vector random_vector(Rng& rng, int n, double lo, double hi) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = uniform(rng, lo, hi);
  return v;
}

Matrix random_matrix(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = uniform(rng, lo, hi);
  return m;
}

Matrix random_spd(Rng& rng, int n) {
  const Matrix a = random_matrix(rng, n, n);
  return a * a.transpose() + 0.5 * Matrix::Identity(n, n);
}

class Collector {
 public:
  explicit Collector(std::string suite) : suite_(std::move(suite)) {}

  void below(const std::string& name, double value, double limit, std::string detail = {}) {
    checks_.push_back({suite_, name, std::isfinite(value) && value <= limit, value, limit,
                       std::move(detail)});
  }
  void truth(const std::string& name, bool ok, std::string detail = {}) {
    checks_.push_back({suite_, name, ok, ok ? 0.0 : 1.0, 0.0, std::move(detail)});
  }
  /// Runs `body`; an escaping exception fails the check `name`.
  void guarded(const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      checks_.push_back({suite_, name, false, 1.0, 0.0, std::string("exception: ") + e.what()});
    }
  }
  std::vector<CheckResult> take() { return std::move(checks_); }

 private:
  std::string suite_;
  std::vector<CheckResult> checks_;
};

double central_fd_error(const ValueFunctionProvider& p, const Vector& x) {
  const Vector g = p.gradient(x);
  Vector fd(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    fd[i] = (p.value(xp) - p.value(xm)) / (2.0 * h);
  }
  return (g - fd).norm() / std::max(1.0, g.norm());
}

// ------------------------------------------------------------- dynamics

std::vector<CheckResult> suite_dynamics(const VerifyOptions& opt) {
  Collector c("dynamics");
  Rng rng(opt.seed);
  c.guarded("rk4_double_integrator_exact", [&] {
    const ControlAffineSystem di = make_double_integrator();
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const Vector x = random_vector(rng, 2, -3, 3);
      const Vector u = random_vector(rng, 1, -2, 2);
      const double dt = uniform(rng, 0.001, 0.2);
      Vector exact(2);
      exact << x[0] + x[1] * dt + 0.5 * u[0] * dt * dt, x[1] + u[0] * dt;
      worst = std::max(worst, (step_rk4(di, x, u, dt) - exact).norm());
    }
    c.below("rk4_double_integrator_exact", worst, 1e-12, "RK4 is exact for quadratic-in-time flows");
  });
  c.guarded("rk4_linear_vs_expm", [&] {
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 3, m = 2;
      const Matrix a = random_matrix(rng, n, n), b = random_matrix(rng, n, m);
      const ControlAffineSystem sys = make_linear_system(a, b);
      const Vector x = random_vector(rng, n, -1, 1), u = random_vector(rng, m, -1, 1);
      const double dt = 0.01;
      Matrix aug = Matrix::Zero(n + 1, n + 1);
      aug.topLeftCorner(n, n) = a;
      aug.topRightCorner(n, 1) = b * u;
      const Matrix phi = (aug * dt).exp();
      const Vector exact = phi.topLeftCorner(n, n) * x + phi.topRightCorner(n, 1);
      worst = std::max(worst, (step_rk4(sys, x, u, dt) - exact).norm());
    }
    c.below("rk4_linear_vs_expm", worst, 1e-10, "one step, dt = 0.01, local error O(dt^5)");
  });
  c.guarded("rk4_fourth_order", [&] {
    // Pendulum-like nonlinear drift; local error ratio for dt vs dt/2 ~ 32.
    ControlAffineSystem sys(
        2, 1, [](const Vector& x) { Vector f(2); f << x[1], -std::sin(x[0]); return f; },
        [](const Vector&) { Matrix g(2, 1); g << 0, 1; return g; }, "pendulum");
    const Vector x = Eigen::Vector2d(1.0, 0.3), u = Vector::Constant(1, 0.2);
    auto reference = [&](double dt) {
      Vector y = x;
      for (int k = 0; k < 256; ++k) y = step_rk4(sys, y, u, dt / 256);
      return y;
    };
    const double e1 = (step_rk4(sys, x, u, 0.1) - reference(0.1)).norm();
    const double e2 = (step_rk4(sys, x, u, 0.05) - reference(0.05)).norm();
    const double ratio = e1 / e2;
    c.truth("rk4_fourth_order", ratio > 20.0 && ratio < 48.0,
            "local error ratio " + std::to_string(ratio) + " (expected ~32)");
  });
  c.guarded("single_integrator_step", [&] {
    const ControlAffineSystem si = make_single_integrator(3, 2);
    const Vector x = random_vector(rng, 6, -2, 2), u = random_vector(rng, 6, -2, 2);
    c.below("single_integrator_step", (step_rk4(si, x, u, 0.05) - (x + 0.05 * u)).norm(), 1e-14);
    c.truth("single_integrator_driftless", si.driftless());
  });
  c.guarded("euler_map", [&] {
    const DiscreteSystem d = discretize(make_double_integrator(), 0.05);
    const Vector x = Eigen::Vector2d(1.0, -1.0), u = Vector::Constant(1, 2.0);
    c.below("euler_map", (d.map(x, u) - Eigen::Vector2d(0.95, -0.9)).norm(), 1e-15);
  });
  return c.take();
}

// -------------------------------------------------------------- valuefn

std::vector<CheckResult> suite_valuefn(const VerifyOptions& opt) {
  Collector c("valuefn");
  Rng rng(opt.seed + 1);
  c.guarded("gradient_fd_analytic", [&] {
    double worst_goto = 0.0, worst_quad = 0.0, worst_form = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      GoToGoalProvider g(random_vector(rng, 2, -2, 2), uniform(rng, 0.1, 4));
      worst_goto = std::max(worst_goto, central_fd_error(g, random_vector(rng, 2, -3, 3)));
      QuadraticProvider q(random_spd(rng, 3), random_spd(rng, 3), random_vector(rng, 3, -1, 1));
      worst_quad = std::max(worst_quad, central_fd_error(q, random_vector(rng, 3, -2, 2)));
      FormationProvider f(hexagon_formation(1.0), 0.01, 0.01);
      worst_form = std::max(worst_form, central_fd_error(f, random_vector(rng, 12, -2, 2)));
    }
    c.below("gradient_fd_goto_goal", worst_goto, 1e-5);
    c.below("gradient_fd_quadratic", worst_quad, 1e-5);
    c.below("gradient_fd_formation", worst_form, 1e-5);
  });
  c.guarded("hjb_residual_analytic", [&] {
    double worst_goto = 0.0, worst_lqr = 0.0;
    const ControlAffineSystem si = make_single_integrator(1, 2);
    for (int trial = 0; trial < 100; ++trial) {
      GoToGoalProvider g(random_vector(rng, 2, -2, 2), uniform(rng, 0.1, 4));
      const Vector x = random_vector(rng, 2, -3, 3);
      worst_goto = std::max(worst_goto, std::abs(hjb_residual(g, x, si.drift(x), si.input_matrix(x))));
    }
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix a = random_matrix(rng, 3, 3), b = random_matrix(rng, 3, 2);
      const Matrix q = random_spd(rng, 3);
      const Matrix p = riccati_solve(a, b, q, Matrix::Identity(2, 2));
      QuadraticProvider v(p, q);
      for (int k = 0; k < 5; ++k) {
        const Vector x = random_vector(rng, 3, -2, 2);
        const double scale = std::max(1.0, x.squaredNorm() * (p.norm() + q.norm()));
        worst_lqr = std::max(worst_lqr, std::abs(hjb_residual(v, x, a * x, b)) / scale);
      }
    }
    c.below("hjb_residual_goto_goal", worst_goto, 1e-8);
    c.below("hjb_residual_lqr", worst_lqr, 1e-8, "relative to |x|^2 (|P| + |Q|)");
  });
  c.guarded("riccati_double_integrator", [&] {
    Matrix a(2, 2), b(2, 1), expected(2, 2);
    a << 0, 1, 0, 0;
    b << 0, 1;
    expected << std::sqrt(3.0), 1, 1, std::sqrt(3.0);
    const Matrix p = riccati_solve(a, b, Matrix::Identity(2, 2), Matrix::Identity(1, 1));
    c.below("riccati_double_integrator", (p - expected).norm(), 1e-10);
  });
  c.guarded("hexagon_energy_zero", [&] {
    const FormationSpec spec = hexagon_formation(1.0);
    const Vector x = hexagon_vertices(1.0, Eigen::Vector2d(0.3, -0.2));
    c.below("hexagon_energy_zero", formation_energy(x, spec), 1e-24);
    c.below("hexagon_gradient_zero", formation_energy_gradient(x, spec).norm(), 1e-12);
  });
  c.guarded("gradient_fd_grid", [&] {
    // Tabulate a smooth function and compare the grid gradient with a
    // central difference of the function itself.
    auto f = [](const Vector& x) {
      return 0.3 + std::sqrt(3.0) * (x[0] * x[0] + x[1] * x[1]) + 2.0 * x[0] * x[1] +
             0.3 * std::sin(2.0 * x[0]) * std::cos(x[1]);
    };
    GridSpec grid{Eigen::Vector2d(-2, -2), Eigen::Vector2d(2, 2), {81, 81}};
    GridValueFunction probe(grid, std::vector<double>(grid.node_count(), 0.0), {});
    std::vector<double> values(grid.node_count());
    for (long i = 0; i < grid.node_count(); ++i) values[i] = f(probe.node_state(i));
    GridValueFunction gvf(grid, values, {});
    double worst = 0.0;
    int used = 0;
    while (used < 200) {
      const Vector x = random_vector(rng, 2, -1.9, 1.9);
      Vector fd(2);
      for (int i = 0; i < 2; ++i) {
        Vector xp = x, xm = x;
        xp[i] += 1e-6;
        xm[i] -= 1e-6;
        fd[i] = (f(xp) - f(xm)) / 2e-6;
      }
      if (fd.norm() < 0.5) continue;
      ++used;
      worst = std::max(worst, (grid_gradient(gvf, x).gradient - fd).norm() / fd.norm());
    }
    c.below("gradient_fd_grid", worst, 0.05, "81 x 81 grid of a smooth function");
  });
  c.guarded("vi_monotone_sweeps", [&] {
    ValueIterationConfig cfg;
    cfg.grid = GridSpec{Eigen::Vector2d(-2, -2), Eigen::Vector2d(2, 2), {21, 21}};
    cfg.goal = Vector::Zero(2);
    cfg.actions = scalar_action_set(-4, 4, 21);
    cfg.tol = 1e-6;
    double worst = 0.0;
    int sweeps = 0;
    cfg.on_sweep = [&](int, double, double min_change) {
      worst = std::min(worst, min_change);
      ++sweeps;
    };
    const ValueIterationResult r = value_iteration(
        discretize(make_double_integrator(), 0.05),
        [](const Vector& x, const Vector& u) { return x.squaredNorm() + u.squaredNorm(); }, cfg);
    c.below("vi_monotone_sweeps", -worst, 1e-12,
            "largest per-node decrease over " + std::to_string(sweeps) + " sweeps");
    c.below("vi_converged", r.residual, cfg.tol);
  });
  return c.take();
}

// ------------------------------------------------------------------ clf

struct ClfSample {
  CLFContext ctx;
  Vector x;
};

ClfSample random_clf_sample(Rng& rng) {
  const int kind = static_cast<int>(rng() % 4);
  if (kind == 0) {
    auto p = goto_goal_provider(random_vector(rng, 2, -2, 2), uniform(rng, 0.1, 4));
    return {CLFContext(p, make_single_integrator(1, 2)), random_vector(rng, 2, -3, 3)};
  }
  if (kind == 1) {
    Matrix a(2, 2), b(2, 1);
    a << 0, 1, 0, 0;
    b << 0, 1;
    const Matrix p = riccati_solve(a, b, Matrix::Identity(2, 2), Matrix::Identity(1, 1));
    return {CLFContext(std::make_shared<QuadraticProvider>(p, Matrix::Identity(2, 2)),
                       make_double_integrator()),
            random_vector(rng, 2, -2, 2)};
  }
  if (kind == 2) {
    const Matrix a = random_matrix(rng, 3, 3), b = random_matrix(rng, 3, 1);
    const Matrix q = random_spd(rng, 3);
    // Any positive definite V works as a CLF candidate here; the Sontag
    // formula is only required to render its own constraint active.
    return {CLFContext(std::make_shared<QuadraticProvider>(random_spd(rng, 3), q),
                       make_linear_system(a, b)),
            random_vector(rng, 3, -2, 2)};
  }
  FormationSpec tri;
  tri.weights = Matrix::Constant(3, 3, 1.0);
  tri.weights.diagonal().setZero();
  return {CLFContext(formation_provider(tri, 0.1, 0.1), make_single_integrator(3, 2)),
          random_vector(rng, 6, -1.5, 1.5)};
}

std::vector<CheckResult> suite_clf(const VerifyOptions& opt) {
  Collector c("clf");
  Rng rng(opt.seed + 2);
  c.guarded("sontag_activity", [&] {
    double worst_active = 0.0, worst_minnorm = 0.0, min_lambda = 1e300;
    int used = 0;
    while (used < 1000) {
      const ClfSample s = random_clf_sample(rng);
      const LieDerivatives lie = lie_derivatives(s.ctx, s.x);
      if (lie.lf1.norm() <= 1e-6) continue;
      ++used;
      const Vector u = sontag_control(s.ctx, s.x);
      const double scale = std::max(1.0, std::abs(lie.lf0) + sigma(s.ctx, s.x));
      worst_active = std::max(worst_active, std::abs(clf_residual(s.ctx, s.x, u)) / scale);
      const MinNormResult mn = min_norm_control(s.ctx, s.x);
      worst_minnorm = std::max(worst_minnorm, (mn.u - u).norm() / std::max(1.0, u.norm()));
      min_lambda = std::min(min_lambda, lambda_scale(s.ctx, s.x));
    }
    c.below("sontag_activity", worst_active, 1e-9, "|residual| / max(1, |Lf0| + sigma)");
    c.below("min_norm_equals_sontag", worst_minnorm, 1e-8, "|u_qp - u_sontag| / max(1, |u|)");
    c.truth("lambda_positive", min_lambda > 0.0, "smallest lambda " + std::to_string(min_lambda));
  });
  c.guarded("lqr_lambda_one", [&] {
    Matrix a(2, 2), b(2, 1);
    a << 0, 1, 0, 0;
    b << 0, 1;
    const Matrix p = riccati_solve(a, b, Matrix::Identity(2, 2), Matrix::Identity(1, 1));
    CLFContext ctx(std::make_shared<QuadraticProvider>(p, Matrix::Identity(2, 2)),
                   make_double_integrator());
    double worst_lambda = 0.0, worst_u = 0.0;
    for (int k = 0; k < 200; ++k) {
      const Vector x = random_vector(rng, 2, -2, 2);
      if (lie_derivatives(ctx, x).lf1.norm() <= 1e-6) continue;
      worst_lambda = std::max(worst_lambda, std::abs(lambda_scale(ctx, x) - 1.0));
      worst_u = std::max(worst_u, (sontag_control(ctx, x) + b.transpose() * p * x).norm());
    }
    c.below("lqr_lambda_one", worst_lambda, 1e-8, "optimal value function gives lambda = 1");
    c.below("lqr_sontag_equals_optimal", worst_u, 1e-8);
  });
  c.guarded("singular_gradient", [&] {
    auto p = goto_goal_provider(Eigen::Vector2d(1, 1), 1.0);
    CLFContext ctx(p, make_single_integrator(1, 2));
    const Vector u = sontag_control(ctx, Eigen::Vector2d(1, 1));
    c.below("singular_gradient_zero_input", u.norm(), 0.0);
    c.below("singular_gradient_lambda_one", std::abs(lambda_scale(ctx, Eigen::Vector2d(1, 1)) - 1.0), 0.0);
  });
  return c.take();
}

// ------------------------------------------------------------------- qp

/// Enumerates every working set; the feasible KKT point with the smallest
/// objective is the minimizer of a strictly convex QP.
std::optional<Vector> brute_force_qp(const QPProblem& p) {
  const int n = p.variables(), r = p.rows();
  std::optional<Vector> best;
  double best_obj = 0.0;
  for (unsigned mask = 0; mask < (1u << r); ++mask) {
    std::vector<int> rows;
    for (int i = 0; i < r; ++i)
      if (mask & (1u << i)) rows.push_back(i);
    const int k = static_cast<int>(rows.size());
    if (k > n) continue;
    Matrix kkt = Matrix::Zero(n + k, n + k);
    Vector rhs(n + k);
    kkt.topLeftCorner(n, n) = p.hessian;
    rhs.head(n) = -p.linear;
    for (int j = 0; j < k; ++j) {
      kkt.block(0, n + j, n, 1) = p.constraints.row(rows[j]).transpose();
      kkt.block(n + j, 0, 1, n) = p.constraints.row(rows[j]);
      rhs[n + j] = p.bounds[rows[j]];
    }
    Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Vector sol = lu.solve(rhs);
    const Vector z = sol.head(n);
    if ((sol.tail(k).array() < -1e-9).any()) continue;
    if (((p.constraints * z - p.bounds).array() > 1e-9).any()) continue;
    const double obj = p.objective(z);
    if (!best || obj < best_obj) best = z, best_obj = obj;
  }
  return best;
}

struct AllActiveInstance {
  Vector f0, sigma;
  Matrix f1, k;
};

/// Random stack with every task row and priority row active at the optimum:
/// all tasks want a decrease larger than any input can deliver cheaply, and
/// the margins are ordered so that each priority row binds.
std::optional<AllActiveInstance> random_all_active(Rng& rng, int m, int tasks, int priority_rows,
                                                   double kappa) {
  AllActiveInstance inst;
  inst.f1 = random_matrix(rng, tasks, m);
  inst.f0 = random_vector(rng, tasks, -1, 1);
  inst.sigma = random_vector(rng, tasks, 0.5, 3);
  inst.k = Matrix::Zero(priority_rows, tasks);
  for (int r = 0; r < priority_rows; ++r) {
    inst.k(r, r) = -1.0;
    inst.k(r, tasks - 1) = uniform(rng, 0.02, 0.1);
  }
  // Make the lowest task hard so the higher ones need the priority rows.
  inst.sigma[tasks - 1] += 20.0;
  try {
    const ClosedFormSolution cf = closed_form_all_active(inst.f0, inst.f1, inst.sigma, inst.k, kappa);
    if ((cf.eta.array() <= 1e-9).any()) return std::nullopt;
  } catch (const NumericalError&) {
    return std::nullopt;
  }
  return inst;
}

QPProblem stack_problem(const AllActiveInstance& inst, double kappa) {
  const int m = static_cast<int>(inst.f1.cols()), t = static_cast<int>(inst.f1.rows());
  const int pr = static_cast<int>(inst.k.rows());
  Matrix h = Matrix::Zero(m + t, m + t);
  h.diagonal().head(m).setConstant(2.0);
  h.diagonal().tail(t).setConstant(2.0 * kappa);
  Matrix a = Matrix::Zero(t + pr, m + t);
  Vector b = Vector::Zero(t + pr);
  a.topLeftCorner(t, m) = inst.f1;
  a.block(0, m, t, t) = -Matrix::Identity(t, t);
  b.head(t) = -inst.f0 - inst.sigma;
  a.block(t, m, pr, t) = -inst.k;
  return QPProblem(h, Vector::Zero(m + t), a, b);
}

std::vector<CheckResult> suite_qp(const VerifyOptions& opt) {
  Collector c("qp");
  Rng rng(opt.seed + 3);
  c.guarded("random_vs_enumeration", [&] {
    double worst = 0.0, worst_kkt = 0.0;
    int count = 0;
    while (count < 100) {
      const int n = 2 + static_cast<int>(rng() % 4), r = 1 + static_cast<int>(rng() % 6);
      const QPProblem p(random_spd(rng, n), random_vector(rng, n, -2, 2),
                        random_matrix(rng, r, n), random_vector(rng, r, -1, 1));
      const std::optional<Vector> oracle = brute_force_qp(p);
      const QPSolution s = solve_qp(p);
      if (!oracle) {
        if (s.status != QPStatus::infeasible) worst = std::max(worst, 1.0);
        continue;
      }
      ++count;
      if (s.status != QPStatus::optimal) {
        worst = std::max(worst, 1.0);
        continue;
      }
      worst = std::max(worst, (s.z - *oracle).norm() / std::max(1.0, oracle->norm()));
      worst_kkt = std::max(worst_kkt, s.kkt_residual);
    }
    c.below("random_vs_enumeration", worst, 1e-7, "100 random strictly convex QPs");
    c.below("random_kkt_residual", worst_kkt, 1e-8);
  });
  c.guarded("closed_form_all_active", [&] {
    double worst = 0.0;
    int count = 0;
    while (count < 100) {
      const auto inst = random_all_active(rng, 12, 4, 3, 10.0);
      if (!inst) continue;
      ++count;
      const ClosedFormSolution cf = closed_form_all_active(inst->f0, inst->f1, inst->sigma, inst->k, 10.0);
      const QPSolution s = solve_qp(stack_problem(*inst, 10.0));
      if (s.status != QPStatus::optimal) {
        worst = std::max(worst, 1.0);
        continue;
      }
      Vector zc(16);
      zc << cf.u, cf.delta;
      worst = std::max(worst, (s.z - zc).norm());
    }
    c.below("closed_form_all_active", worst, 1e-6, "m = 12, M = 4, 3 priority rows, kappa = 10");
  });
  c.guarded("infeasible_certificate", [&] {
    Matrix a(2, 1);
    a << 1, -1;
    const QPProblem p(Matrix::Identity(1, 1), Vector::Zero(1), a, Eigen::Vector2d(-1, -1));
    const QPSolution s = solve_qp(p);
    bool ok = s.status == QPStatus::infeasible && s.certificate.size() == 2;
    double gap = 1.0;
    if (ok) {
      gap = std::max((a.transpose() * s.certificate).norm(), -s.certificate.minCoeff());
      ok = s.certificate.dot(p.bounds) < 0.0;
    }
    c.truth("infeasible_detected", ok);
    c.below("infeasible_certificate", gap, 1e-10, "A'y = 0, y >= 0");
  });
  c.guarded("scalar_example", [&] {
    const QPProblem p(Matrix::Constant(1, 1, 2.0), Vector::Zero(1), Matrix::Constant(1, 1, -1.0),
                      Vector::Constant(1, -1.0));
    const QPSolution s = solve_qp(p);
    c.below("scalar_example", std::abs(s.z[0] - 1.0) + std::abs(s.duals[0] - 2.0), 1e-12,
            "min u^2 s.t. -u <= -1: z = 1, dual = 2");
  });
  return c.take();
}

// ---------------------------------------------------------------- stack

std::vector<CheckResult> suite_stack(const VerifyOptions&) {
  Collector c("stack");
  c.guarded("k_sign_pattern", [&] {
    const PrioritizationMatrix k2 = build_K({{"T1", "T2", 0.05}}, {"T1", "T2"});
    Matrix e2(1, 2);
    e2 << -1, 0.05;
    c.below("k_two_tasks", (k2.k - e2).norm(), 0.0);
    const PrioritizationMatrix k4 =
        build_K({{"T2", "T1", 0.05}, {"T3", "T1", 0.05}, {"T4", "T1", 0.05}}, {"T1", "T2", "T3", "T4"});
    Matrix e4(3, 4);
    e4 << 0.05, -1, 0, 0, 0.05, 0, -1, 0, 0.05, 0, 0, -1;
    c.below("k_phase_one", (k4.k - e4).norm(), 0.0);
  });
  c.guarded("kappa_limit_sontag", [&] {
    auto p = goto_goal_provider(Eigen::Vector2d(0.5, -1.0), 1.0);
    const ControlAffineSystem si = make_single_integrator(1, 2);
    std::vector<TaskSpec> tasks{{"T1", p, std::nullopt, {}}};
    const Vector x = Eigen::Vector2d(2.0, 1.0);
    const AssembledQP qp = assemble_qp(tasks, si, x, PrioritizationMatrix{Matrix(0, 1)}, 1e9);
    const QPSolution s = solve_qp(qp.problem);
    const Vector u = sontag_control(CLFContext(p, si), x);
    c.below("kappa_limit_sontag", (s.z.head(2) - u).norm(), 1e-6, "kappa = 1e9");
  });
  c.guarded("priority_rows_hold", [&] {
    const ControlAffineSystem si = make_single_integrator(1, 2);
    std::vector<TaskSpec> tasks{{"T1", goto_goal_provider(Eigen::Vector2d(-1, 0), 1.0), std::nullopt, {}},
                                {"T2", goto_goal_provider(Eigen::Vector2d(1, 0), 1.0), std::nullopt, {}}};
    const PrioritizationMatrix k = build_K({{"T1", "T2", 0.05}}, {"T1", "T2"});
    const AssembledQP qp = assemble_qp(tasks, si, Eigen::Vector2d(0, 1), k, 10.0);
    const QPSolution s = solve_qp(qp.problem);
    const double prio = -(k.k * s.z.tail(2)).minCoeff();
    const double rows = qp.task_residuals(s.z).maxCoeff();
    c.below("priority_rows_hold", std::max(prio, rows), 1e-9);
  });
  return c.take();
}

// ------------------------------------------------------------------ sim

std::vector<CheckResult> suite_sim(const VerifyOptions&) {
  Collector c("sim");
  c.guarded("goto_goal_exponential", [&] {
    auto p = goto_goal_provider(Eigen::Vector2d(0, 0), 1.0);
    Scenario sc{make_single_integrator(1, 2), {{"T1", p, std::nullopt, {}}},
                constant_schedule({}, 3.0), 3.0, 0.01, Eigen::Vector2d(3, 4), {}};
    sc.controller.kappa = 1e6;
    const SimulationTrace tr = run(sc);
    double worst = 0.0;
    for (const StepRecord& r : tr.records) {
      const double expected = 25.0 * std::exp(-2.0 * r.t);
      worst = std::max(worst, std::abs(r.values[0] - expected) / expected);
    }
    c.truth("goto_goal_completed", !tr.failed, tr.failure);
    c.below("goto_goal_exponential", worst, 0.05, "J(t) vs 25 exp(-2t)");
  });
  c.guarded("determinism", [&] {
    auto a = goto_goal_provider(Eigen::Vector2d(-1, 0), 1.0);
    auto b = goto_goal_provider(Eigen::Vector2d(1, 0.5), 1.0);
    Scenario sc{make_single_integrator(1, 2),
                {{"T1", a, std::nullopt, {}}, {"T2", b, std::nullopt, {}}},
                constant_schedule({{"T1", "T2", 0.05}}, 2.0), 2.0, 0.01, Eigen::Vector2d(0, 2), {}};
    sc.controller.kappa = 1.0;
    const SimulationTrace t1 = run(sc), t2 = run(sc);
    bool same = t1.size() == t2.size();
    for (std::size_t i = 0; same && i < t1.size(); ++i) {
      same = t1.records[i].x == t2.records[i].x && t1.records[i].u == t2.records[i].u;
    }
    c.truth("determinism", same, "two runs give bitwise identical states and inputs");
    double worst = 0.0;
    const PrioritizationMatrix k = build_K({{"T1", "T2", 0.05}}, {"T1", "T2"});
    for (const StepRecord& r : t1.records) {
      worst = std::max(worst, r.residual.maxCoeff());
      worst = std::max(worst, -(k.k * r.delta).minCoeff() - 1e-6);
    }
    c.below("constraints_satisfied", worst, 1e-8);
  });
  c.guarded("nullspace_two_task", [&] {
    auto a = goto_goal_provider(Eigen::Vector2d(-1, 0), 1.0);
    auto b = goto_goal_provider(Eigen::Vector2d(1, 0), 1.0);
    Scenario sc{make_single_integrator(1, 2),
                {{"T1", a, std::nullopt, {}}, {"T2", b, std::nullopt, {}}},
                constant_schedule({{"T1", "T2", 0.05}}, 15.0), 15.0, 0.01, Eigen::Vector2d(0, 2), {}};
    sc.controller.kappa = 1.0;
    const SimulationTrace tr = run(sc);
    const NullspaceReport rep =
        check_nullspace_convergence(tr, build_K({{"T1", "T2", 0.05}}, {"T1", "T2"}), 0.05);
    c.below("nullspace_two_task", rep.ratio, 0.05, "|K J(15)| / |K J(0)|");
  });
  c.guarded("at_goal_constant", [&] {
    auto p = goto_goal_provider(Eigen::Vector2d(1, 2), 1.0);
    Scenario sc{make_single_integrator(1, 2), {{"T1", p, std::nullopt, {}}},
                constant_schedule({}, 1.0), 1.0, 0.01, Eigen::Vector2d(1, 2), {}};
    const SimulationTrace tr = run(sc);
    c.below("at_goal_constant", (tr.records.back().x - Eigen::Vector2d(1, 2)).norm(), 0.0);
  });
  return c.take();
}

// --------------------------------------------------------------- config

const char* kSampleConfig = R"({
  "name": "sample",
  "system": {"type": "single_integrator", "robot_count": 2, "workspace_dim": 2},
  "tasks": [
    {"id": "A", "type": "goto_goal", "params": {"goal": [1, 0], "c": 1}, "robot_block": 0},
    {"id": "B", "type": "goto_goal", "params": {"goal": [0.1, 0.2], "c": 2.5}, "robot_block": 1}
  ],
  "schedule": {"segments": [
    {"t_start": 0, "t_end": 1.5, "l": 0.05, "relations": [{"higher": "A", "lower": "B"}]},
    {"t_start": 1.5, "t_end": 3, "relations": []}
  ]},
  "controller": {"kappa": 2},
  "simulation": {"dt": 0.01, "horizon": 3, "x0": [0, 0, 1, 1]}
})";

std::vector<CheckResult> suite_config(const VerifyOptions& opt) {
  Collector c("config");
  auto round_trip = [&](const std::string& label, const std::string& text, const std::string& dir) {
    c.guarded("round_trip:" + label, [&] {
      const ScenarioConfig a = parse_config(text, dir);
      const std::string s1 = serialize_config(a);
      const ScenarioConfig b = parse_config(s1, dir);
      const std::string s2 = serialize_config(b);
      c.truth("round_trip:" + label, a == b && s1 == s2, "parse -> serialize -> parse");
    });
  };
  round_trip("builtin_sample", kSampleConfig, ".");
  if (!opt.scenario_dir.empty() && std::filesystem::is_directory(opt.scenario_dir)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(opt.scenario_dir)) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream is(f);
      std::stringstream ss;
      ss << is.rdbuf();
      round_trip(f.filename().string(), ss.str(), f.parent_path().string());
    }
  }
  auto rejects = [&](const std::string& name, const std::string& text, const std::string& needle) {
    try {
      parse_config(text);
      c.truth(name, false, "accepted");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      c.truth(name, msg.find(needle) != std::string::npos, msg);
    }
  };
  std::string unknown = kSampleConfig;
  unknown.replace(unknown.find("\"kappa\""), 7, "\"kapa\"");
  rejects("unknown_key_rejected", unknown, "controller.kapa");
  std::string zero_dt = kSampleConfig;
  zero_dt.replace(zero_dt.find("\"dt\": 0.01"), 10, "\"dt\": 0");
  rejects("zero_dt_rejected", zero_dt, "simulation.dt");
  std::string bad_id = kSampleConfig;
  bad_id.replace(bad_id.find("\"lower\": \"B\""), 12, "\"lower\": \"C\"");
  rejects("undefined_task_rejected", bad_id, "undefined task id 'C'");
  return c.take();
}

const std::map<std::string, std::function<std::vector<CheckResult>(const VerifyOptions&)>>&
registry() {
  static const std::map<std::string, std::function<std::vector<CheckResult>(const VerifyOptions&)>> r{
      {"dynamics", suite_dynamics}, {"valuefn", suite_valuefn}, {"clf", suite_clf},
      {"qp", suite_qp},             {"stack", suite_stack},     {"sim", suite_sim},
      {"config", suite_config}};
  return r;
}

}  // namespace

bool SuiteReport::passed() const {
  return !checks.empty() &&
         std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

const std::vector<std::string>& available_suites() {
  static const std::vector<std::string> names{"dynamics", "valuefn", "clf",   "qp",
                                              "stack",    "sim",     "config", "all"};
  return names;
}

SuiteReport run_suite(const std::string& name, const VerifyOptions& options) {
  SuiteReport report;
  report.suite = name;
  report.seed = options.seed;
  if (name == "all") {
    std::vector<std::future<std::vector<CheckResult>>> jobs;
    for (const auto& [suite, fn] : registry()) {
      jobs.push_back(std::async(std::launch::async, fn, options));
    }
    for (auto& j : jobs) {
      std::vector<CheckResult> part = j.get();
      report.checks.insert(report.checks.end(), part.begin(), part.end());
    }
    return report;
  }
  const auto it = registry().find(name);
  if (it == registry().end()) {
    std::string list;
    for (const std::string& s : available_suites()) list += (list.empty() ? "" : ", ") + s;
    throw ValidationError("unknown suite '" + name + "'; available: " + list);
  }
  report.checks = it->second(options);
  return report;
}

void write_report_json(std::ostream& os, const SuiteReport& report) {
  nlohmann::ordered_json doc;
  doc["suite"] = report.suite;
  doc["seed"] = report.seed;
  doc["passed"] = report.passed();
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const CheckResult& c : report.checks) {
    nlohmann::ordered_json j;
    j["suite"] = c.suite;
    j["name"] = c.name;
    j["passed"] = c.passed;
    j["value"] = std::isfinite(c.value) ? nlohmann::ordered_json(c.value) : nlohmann::ordered_json(nullptr);
    j["limit"] = c.limit;
    if (!c.detail.empty()) j["detail"] = c.detail;
    checks.push_back(j);
  }
  doc["checks"] = checks;
  os << doc.dump(2) << '\n';
}

}  // namespace clfstack
