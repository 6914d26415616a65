#pragma once

#include "clfstack/common.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace clfstack {

/// minimize 1/2 z'Hz + c'z  subject to  A z <= b.
struct QPProblem {
  Matrix hessian;
  Vector linear;
  Matrix constraints;
  Vector bounds;

  QPProblem() = default;
  /// Validates shapes, symmetry, and H >= 0 (smallest eigenvalue >= -1e-10
  /// relative to |H|).
  QPProblem(Matrix h, Vector c, Matrix a, Vector b);

  int variables() const { return static_cast<int>(hessian.rows()); }
  int rows() const { return static_cast<int>(constraints.rows()); }
  double objective(const Vector& z) const {
    return 0.5 * z.dot(hessian * z) + linear.dot(z);
  }
};

enum class QPStatus { optimal, infeasible, max_iter };

const char* to_string(QPStatus status);

struct QPSolution {
  Vector z;
  /// One multiplier per constraint row, >= 0 at optimality.
  Vector duals;
  QPStatus status = QPStatus::max_iter;
  /// Worst of stationarity, primal infeasibility, dual infeasibility and
  /// complementarity violation.
  double kkt_residual = 0.0;
  int iterations = 0;
  /// Rows in the final working set, ascending.
  std::vector<int> active;
  /// When infeasible: y >= 0 with A'y = 0 and b'y < 0.
  Vector certificate;
};

struct QPOptions {
  double tol = 1e-8;
  int max_iter = 500;
};

/// Dual active-set method (Goldfarb-Idnani) on small dense problems. Starts
/// from the unconstrained minimizer, or from `warm_active` (row indices)
/// after dropping rows whose multipliers come out negative. Violated rows are
/// added most-violated first with ties broken by lowest index, so the solve is
/// deterministic. Duplicate rows are merged (with a warning). A singular H is
/// handled by proximal-point outer iterations.
QPSolution solve_qp(const QPProblem& problem, const QPOptions& options = {},
                    std::span<const int> warm_active = {});

/// Worst KKT violation of (z, duals) for `problem`.
double kkt_residual(const QPProblem& problem, const Vector& z,
                    const Vector& duals);

/// Text dump of a problem and its solution, see docs/formats.md.
void write_qp_debug(std::ostream& os, const QPProblem& problem,
                    const QPSolution& solution);

/// Primal and dual solution of the prioritized task QP
///   min |u|^2 + kappa |delta|^2
///   s.t. f0 + F1 u + sigma - delta <= 0,   -K delta <= 0
/// under the assumption that every row is active.
struct ClosedFormSolution {
  Vector u;
  Vector delta;
  /// Multipliers of the task rows followed by the priority rows, in the sign
  /// convention of solve_qp.
  Vector eta;
  /// 2-norm condition number of the bordered KKT matrix.
  double condition = 0.0;
};

/// Throws NumericalError if the bordered matrix
///   [ I/kappa + F1 F1'   -K'/kappa ]
///   [ K                  -K K'     ]
/// is singular, which happens when K is row-rank deficient.
ClosedFormSolution closed_form_all_active(const Vector& f0, const Matrix& f1,
                                          const Vector& sigma, const Matrix& k,
                                          double kappa);

/// The task-space gain F1 F1' [A1^-1]_11 that maps the margins sigma to the
/// decrease of the task values when every row is active. Its eigenvalues are
/// real and nonnegative.
Matrix prioritized_gain(const Matrix& f1, const Matrix& k, double kappa);

}  // namespace clfstack
