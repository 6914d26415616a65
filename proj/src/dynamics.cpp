#include "clfstack/dynamics.hpp"

#include <random>
#include <sstream>

namespace clfstack {
namespace {

std::string shape_msg(const std::string& label, const char* what, long rows,
                      long cols, long want_rows, long want_cols) {
  std::ostringstream os;
  os << label << ": " << what << " has shape " << rows << "x" << cols
     << ", expected " << want_rows << "x" << want_cols;
  return os.str();
}

}  // namespace

ControlAffineSystem::ControlAffineSystem(int state_dim, int input_dim,
                                         DriftFn drift,
                                         InputMatrixFn input_matrix,
                                         std::string label, bool driftless)
    : state_dim_(state_dim),
      input_dim_(input_dim),
      drift_(std::move(drift)),
      input_matrix_(std::move(input_matrix)),
      label_(std::move(label)),
      driftless_(driftless) {
  require(state_dim_ >= 1, "state dimension must be positive");
  require(input_dim_ >= 1, "input dimension must be positive");
  require(static_cast<bool>(drift_) && static_cast<bool>(input_matrix_),
          "system fields must be callable");
  if (driftless_) {
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> normal(0.0, 3.0);
    for (int trial = 0; trial < 16; ++trial) {
      Vector x(state_dim_);
      for (int i = 0; i < state_dim_; ++i) x[i] = normal(rng);
      require(drift_(x).isZero(0.0),
              label_ + ": flagged driftless but f0(x) != 0 at a sampled state");
    }
  }
}

Vector ControlAffineSystem::drift(const Vector& x) const {
  require(x.size() == state_dim_,
          shape_msg(label_, "state", x.size(), 1, state_dim_, 1));
  Vector f0 = drift_(x);
  require(f0.size() == state_dim_,
          shape_msg(label_, "drift", f0.size(), 1, state_dim_, 1));
  return f0;
}

Matrix ControlAffineSystem::input_matrix(const Vector& x) const {
  require(x.size() == state_dim_,
          shape_msg(label_, "state", x.size(), 1, state_dim_, 1));
  Matrix f1 = input_matrix_(x);
  require(f1.rows() == state_dim_ && f1.cols() == input_dim_,
          shape_msg(label_, "input matrix", f1.rows(), f1.cols(), state_dim_,
                    input_dim_));
  return f1;
}

Vector ControlAffineSystem::field(const Vector& x, const Vector& u) const {
  require(u.size() == input_dim_,
          shape_msg(label_, "input", u.size(), 1, input_dim_, 1));
  return drift(x) + input_matrix(x) * u;
}

Vector DiscreteSystem::map(const Vector& x, const Vector& u) const {
  return x + dt * base.field(x, u);
}

ControlAffineSystem make_single_integrator(int robot_count, int workspace_dim) {
  require(robot_count >= 1, "robot_count must be >= 1");
  require(workspace_dim >= 1, "workspace_dim must be >= 1");
  const int n = robot_count * workspace_dim;
  std::ostringstream label;
  label << "single_integrator(" << robot_count << "x" << workspace_dim << ")";
  return ControlAffineSystem(
      n, n, [n](const Vector&) { return Vector::Zero(n).eval(); },
      [n](const Vector&) { return Matrix::Identity(n, n).eval(); },
      label.str(), /*driftless=*/true);
}

ControlAffineSystem make_double_integrator() {
  Matrix a(2, 2);
  a << 0, 1, 0, 0;
  Matrix b(2, 1);
  b << 0, 1;
  return make_linear_system(a, b, "double_integrator");
}

ControlAffineSystem make_linear_system(const Matrix& a, const Matrix& b,
                                       std::string label) {
  require(a.rows() == a.cols(), "A must be square");
  require(b.rows() == a.rows(), "B must have as many rows as A");
  const bool driftless = a.isZero(0.0);
  return ControlAffineSystem(
      static_cast<int>(a.rows()), static_cast<int>(b.cols()),
      [a](const Vector& x) { return (a * x).eval(); },
      [b](const Vector&) { return b; }, std::move(label), driftless);
}

Vector step_rk4(const ControlAffineSystem& sys, const Vector& x,
                const Vector& u, double dt) {
  require(dt > 0.0, "dt must be positive");
  require(x.size() == sys.state_dim(), sys.label() + ": state dimension mismatch");
  require(u.size() == sys.input_dim(), sys.label() + ": input dimension mismatch");
  const Vector k1 = sys.field(x, u);
  const Vector k2 = sys.field(x + 0.5 * dt * k1, u);
  const Vector k3 = sys.field(x + 0.5 * dt * k2, u);
  const Vector k4 = sys.field(x + dt * k3, u);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

DiscreteSystem discretize(const ControlAffineSystem& sys, double dt) {
  require(dt > 0.0, "dt must be positive");
  return DiscreteSystem{sys, dt};
}

}  // namespace clfstack
