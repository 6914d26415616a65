#include "clfstack/valuefn.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace clfstack {
namespace {

std::string format_point(const Vector& p) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p[i];
  os << ")";
  return os.str();
}

void check_state(const ValueFunctionProvider& provider, const Vector& x) {
  require(x.size() == provider.dim(), "state dimension does not match provider");
}

}  // namespace

// ---------------------------------------------------------------- go-to-goal

GoToGoalProvider::GoToGoalProvider(Vector goal, double c)
    : goal_(std::move(goal)), c_(c) {
  require(c_ > 0.0, "go-to-goal weight c must be positive");
  require(goal_.size() >= 1, "goal must be nonempty");
}

double GoToGoalProvider::value(const Vector& x) const {
  check_state(*this, x);
  return std::sqrt(c_) * (x - goal_).squaredNorm();
}

Vector GoToGoalProvider::gradient(const Vector& x) const {
  check_state(*this, x);
  return 2.0 * std::sqrt(c_) * (x - goal_);
}

double GoToGoalProvider::stage_cost(const Vector& x) const {
  check_state(*this, x);
  return c_ * (x - goal_).squaredNorm();
}

std::string GoToGoalProvider::goal_descriptor() const {
  return "point" + format_point(goal_);
}

std::shared_ptr<const GoToGoalProvider> goto_goal_provider(const Vector& goal,
                                                           double c) {
  return std::make_shared<const GoToGoalProvider>(goal, c);
}

// ----------------------------------------------------------------- quadratic

QuadraticProvider::QuadraticProvider(Matrix p, Matrix q, Vector center)
    : p_(std::move(p)), q_(std::move(q)), center_(std::move(center)) {
  require(p_.rows() == p_.cols() && q_.rows() == p_.rows() &&
              q_.cols() == p_.cols() && center_.size() == p_.rows(),
          "quadratic provider: inconsistent sizes");
  require(p_.isApprox(p_.transpose(), 1e-12), "P must be symmetric");
}

QuadraticProvider::QuadraticProvider(Matrix p, Matrix q)
    : QuadraticProvider(p, q, Vector::Zero(p.rows())) {}

double QuadraticProvider::value(const Vector& x) const {
  check_state(*this, x);
  const Vector e = x - center_;
  return std::max(0.0, e.dot(p_ * e));
}

Vector QuadraticProvider::gradient(const Vector& x) const {
  check_state(*this, x);
  return (p_ + p_.transpose()) * (x - center_);
}

double QuadraticProvider::stage_cost(const Vector& x) const {
  check_state(*this, x);
  const Vector e = x - center_;
  return std::max(0.0, e.dot(q_ * e));
}

std::string QuadraticProvider::goal_descriptor() const {
  return "point" + format_point(center_);
}

// ----------------------------------------------------------------- formation

void FormationSpec::validate() const {
  require(weights.rows() == weights.cols() && weights.rows() >= 2,
          "formation weight matrix must be square with at least two robots");
  require(workspace_dim >= 1, "formation workspace_dim must be positive");
  for (int i = 0; i < weights.rows(); ++i) {
    require(weights(i, i) == 0.0, "formation weight matrix diagonal must be zero");
    for (int j = 0; j < weights.cols(); ++j) {
      require(weights(i, j) >= 0.0, "formation weights must be nonnegative");
      require(weights(i, j) == weights(j, i),
              "formation weight matrix must be symmetric");
    }
  }
}

FormationSpec hexagon_formation(double side) {
  require(side > 0.0, "hexagon side must be positive");
  const double l = side;
  const double r3 = std::sqrt(3.0) * l;
  FormationSpec spec;
  spec.workspace_dim = 2;
  spec.weights.resize(6, 6);
  // clang-format off
  spec.weights <<
      0,    l,  r3,  2*l, 0,   l,
      l,    0,  l,   0,   2*l, 0,
      r3,   l,  0,   l,   0,   2*l,
      2*l,  0,  l,   0,   l,   0,
      0,    2*l, 0,  l,   0,   l,
      l,    0,  2*l, 0,   l,   0;
  // clang-format on
  return spec;
}

Vector hexagon_vertices(double side, const Eigen::Vector2d& center) {
  Vector x(12);
  for (int k = 0; k < 6; ++k) {
    const double angle = M_PI / 3.0 * k;
    x[2 * k] = center.x() + side * std::cos(angle);
    x[2 * k + 1] = center.y() + side * std::sin(angle);
  }
  return x;
}

double formation_energy(const Vector& x, const FormationSpec& spec) {
  const int n = spec.robot_count();
  const int d = spec.workspace_dim;
  require(x.size() == n * d, "ensemble state does not match formation size");
  double energy = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!spec.is_neighbor(i, j)) continue;
      const double w = spec.weights(i, j);
      const double dist2 = (x.segment(i * d, d) - x.segment(j * d, d)).squaredNorm();
      const double e = dist2 - w * w;
      energy += e * e;
    }
  }
  return energy;
}

Vector formation_energy_gradient(const Vector& x, const FormationSpec& spec) {
  const int n = spec.robot_count();
  const int d = spec.workspace_dim;
  require(x.size() == n * d, "ensemble state does not match formation size");
  Vector grad = Vector::Zero(x.size());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!spec.is_neighbor(i, j)) continue;
      const double w = spec.weights(i, j);
      const Vector diff = x.segment(i * d, d) - x.segment(j * d, d);
      grad.segment(i * d, d) += 8.0 * (diff.squaredNorm() - w * w) * diff;
    }
  }
  return grad;
}

FormationProvider::FormationProvider(FormationSpec spec, double energy_weight,
                                     double cost_weight)
    : spec_(std::move(spec)),
      energy_weight_(energy_weight),
      cost_weight_(cost_weight) {
  spec_.validate();
  require(energy_weight_ > 0.0, "formation energy weight must be positive");
  require(cost_weight_ >= 0.0, "formation cost weight must be nonnegative");
}

double FormationProvider::value(const Vector& x) const {
  return energy_weight_ * formation_energy(x, spec_);
}

Vector FormationProvider::gradient(const Vector& x) const {
  return energy_weight_ * formation_energy_gradient(x, spec_);
}

double FormationProvider::stage_cost(const Vector& x) const {
  return cost_weight_ * formation_energy(x, spec_);
}

std::shared_ptr<const FormationProvider> formation_provider(
    const FormationSpec& spec, double energy_weight, double cost_weight) {
  return std::make_shared<const FormationProvider>(spec, energy_weight,
                                                   cost_weight);
}

// ------------------------------------------------------------------ riccati

double riccati_residual(const Matrix& a, const Matrix& b, const Matrix& q,
                        const Matrix& r, const Matrix& p) {
  const Matrix rinv_bt = r.llt().solve(b.transpose());
  return (a.transpose() * p + p * a - p * b * rinv_bt * p + q).norm();
}

namespace {

// Solves Ac' X + X Ac = -C for small dense Ac through the Kronecker form.
Matrix solve_lyapunov(const Matrix& ac, const Matrix& c) {
  const Eigen::Index n = ac.rows();
  const Matrix eye = Matrix::Identity(n, n);
  Matrix kron = Matrix::Zero(n * n, n * n);
  const Matrix act = ac.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      kron.block(i * n, j * n, n, n) += eye(i, j) * act + act(i, j) * eye;
    }
  }
  const Vector rhs = -Eigen::Map<const Vector>(c.data(), n * n);
  const Vector sol = kron.fullPivLu().solve(rhs);
  Matrix x = Eigen::Map<const Matrix>(sol.data(), n, n);
  return 0.5 * (x + x.transpose());
}

bool is_hurwitz(const Matrix& m) {
  const Eigen::VectorXcd eig = m.eigenvalues();
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    if (eig[i].real() >= 0.0) return false;
  }
  return true;
}

}  // namespace

Matrix riccati_solve(const Matrix& a, const Matrix& b, const Matrix& q,
                     const Matrix& r) {
  const Eigen::Index n = a.rows();
  require(a.cols() == n && b.rows() == n && q.rows() == n && q.cols() == n &&
              r.rows() == b.cols() && r.cols() == b.cols(),
          "riccati_solve: inconsistent sizes");
  Eigen::LLT<Matrix> r_llt(r);
  require(r_llt.info() == Eigen::Success, "riccati_solve: R must be positive definite");
  const Matrix g = b * r_llt.solve(b.transpose());

  // Stable invariant subspace of the Hamiltonian via the matrix sign function.
  Matrix z(2 * n, 2 * n);
  z << a, -g, -q, -a.transpose();
  Matrix w = z;
  bool converged = false;
  for (int it = 0; it < 100; ++it) {
    Eigen::PartialPivLU<Matrix> lu(w);
    const double det = std::abs(lu.determinant());
    if (!(det > 0.0) || !std::isfinite(det)) break;
    const double scale = std::pow(det, -1.0 / static_cast<double>(2 * n));
    const Matrix next = 0.5 * (scale * w + lu.inverse() / scale);
    const double change = (next - w).norm();
    w = next;
    if (change <= 1e-13 * w.norm()) {
      converged = true;
      break;
    }
  }
  const double tol = 1e-10 * std::max(1.0, q.norm());
  if (!converged) {
    throw NumericalError(
        "riccati_solve: Hamiltonian sign iteration did not converge "
        "((A, B) may not be stabilizable)",
        std::numeric_limits<double>::infinity());
  }
  const Matrix eye = Matrix::Identity(n, n);
  Matrix lhs(2 * n, n), rhs(2 * n, n);
  lhs << w.topRightCorner(n, n), w.bottomRightCorner(n, n) + eye;
  rhs << w.topLeftCorner(n, n) + eye, w.bottomLeftCorner(n, n);
  Matrix p = lhs.colPivHouseholderQr().solve(-rhs);
  p = 0.5 * (p + p.transpose());

  // Newton-Kleinman refinement from the sign-function estimate.
  double residual = riccati_residual(a, b, q, r, p);
  for (int it = 0; it < 20 && residual > 1e-3 * tol; ++it) {
    const Matrix k = r_llt.solve(b.transpose() * p);
    const Matrix ac = a - b * k;
    if (!is_hurwitz(ac)) break;
    const Matrix next = solve_lyapunov(ac, q + k.transpose() * r * k);
    const double next_residual = riccati_residual(a, b, q, r, next);
    if (!(next_residual < residual)) break;
    p = next;
    residual = next_residual;
  }
  if (!(residual <= tol)) {
    throw NumericalError("riccati_solve: residual above tolerance", residual);
  }
  return p;
}

double hjb_residual(const ValueFunctionProvider& provider, const Vector& x,
                    const Vector& drift, const Matrix& input_matrix) {
  const Vector grad = provider.gradient(x);
  const double lf0 = grad.dot(drift);
  const RowVector lf1 = grad.transpose() * input_matrix;
  return lf0 - 0.25 * lf1.squaredNorm() + provider.stage_cost(x);
}

}  // namespace clfstack
