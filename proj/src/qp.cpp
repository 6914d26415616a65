#include "clfstack/qp.hpp"

#include "clfstack/log.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace clfstack {

QPProblem::QPProblem(Matrix h, Vector c, Matrix a, Vector b)
    : hessian(std::move(h)),
      linear(std::move(c)),
      constraints(std::move(a)),
      bounds(std::move(b)) {
  const Eigen::Index d = hessian.rows();
  require(d >= 1 && hessian.cols() == d, "QP Hessian must be square and nonempty");
  require(linear.size() == d, "QP linear term has the wrong length");
  require(constraints.cols() == d || constraints.rows() == 0,
          "QP constraint matrix has the wrong number of columns");
  if (constraints.rows() == 0) constraints.resize(0, d);
  require(bounds.size() == constraints.rows(), "QP bound vector has the wrong length");
  require(hessian.allFinite() && linear.allFinite() && constraints.allFinite() &&
              bounds.allFinite(),
          "QP data must be finite");
  require((hessian - hessian.transpose()).cwiseAbs().maxCoeff() <=
              1e-12 * std::max(1.0, hessian.cwiseAbs().maxCoeff()),
          "QP Hessian must be symmetric");
  const double min_eig =
      Eigen::SelfAdjointEigenSolver<Matrix>(hessian, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .minCoeff();
  require(min_eig >= -1e-10 * std::max(1.0, hessian.norm()),
          "QP Hessian must be positive semidefinite");
}

const char* to_string(QPStatus status) {
  switch (status) {
    case QPStatus::optimal: return "optimal";
    case QPStatus::infeasible: return "infeasible";
    case QPStatus::max_iter: return "max_iter";
  }
  return "?";
}

double kkt_residual(const QPProblem& p, const Vector& z, const Vector& duals) {
  double r = (p.hessian * z + p.linear + p.constraints.transpose() * duals)
                 .lpNorm<Eigen::Infinity>();
  for (int i = 0; i < p.rows(); ++i) {
    const double slack = p.constraints.row(i).dot(z) - p.bounds[i];
    r = std::max(r, slack);
    r = std::max(r, -duals[i]);
    r = std::max(r, std::abs(duals[i] * slack));
  }
  return r;
}

namespace {

// Strictly convex core: H positive definite, rows already deduplicated.
class DualActiveSet {
 public:
  DualActiveSet(const Matrix& h, const Vector& c, const Matrix& a,
                const Vector& b, const QPOptions& opt)
      : h_(h), c_(c), a_(a), b_(b), opt_(opt), llt_(h) {}

  bool factorized() const { return llt_.info() == Eigen::Success; }

  QPSolution solve(std::span<const int> warm) {
    QPSolution sol;
    lambda_.clear();
    working_.clear();
    z_ = -llt_.solve(c_);
    if (!warm.empty()) warm_start(warm);

    int iterations = 0;
    while (true) {
      const int p = most_violated();
      if (p < 0) break;
      double lambda_p = 0.0;
      bool added = false;
      while (!added) {
        if (++iterations > opt_.max_iter) {
          return finish(QPStatus::max_iter, iterations, {});
        }
        const Vector ap = a_.row(p).transpose();
        Vector dz, dlambda;
        step_direction(ap, dz, dlambda);
        const double curvature = -ap.dot(dz);
        const double scale = ap.dot(llt_.solve(ap));
        const bool dependent = curvature <= 1e-13 * std::max(scale, 1e-300);

        // Largest step keeping the working-set multipliers nonnegative.
        double t_dual = std::numeric_limits<double>::infinity();
        int block = -1;
        for (std::size_t i = 0; i < working_.size(); ++i) {
          if (dlambda[i] < -1e-14) {
            const double ratio = lambda_[i] / -dlambda[i];
            if (ratio < t_dual) {
              t_dual = ratio;
              block = static_cast<int>(i);
            }
          }
        }
        if (dependent) {
          if (block < 0) {
            Vector y = Vector::Zero(a_.rows());
            y[p] = 1.0;
            for (std::size_t i = 0; i < working_.size(); ++i) {
              y[working_[i]] = std::max(0.0, dlambda[i]);
            }
            return finish(QPStatus::infeasible, iterations, y);
          }
          for (std::size_t i = 0; i < working_.size(); ++i) {
            lambda_[i] += t_dual * dlambda[i];
          }
          lambda_p += t_dual;
          drop(block);
          continue;
        }
        const double t_primal = (ap.dot(z_) - b_[p]) / curvature;
        const double t = std::min(t_primal, t_dual);
        z_ += t * dz;
        for (std::size_t i = 0; i < working_.size(); ++i) {
          lambda_[i] += t * dlambda[i];
        }
        lambda_p += t;
        if (t_primal <= t_dual) {
          working_.push_back(p);
          lambda_.push_back(lambda_p);
          added = true;
        } else {
          drop(block);
        }
      }
    }
    return finish(QPStatus::optimal, iterations, {});
  }

 private:
  // dz, dlambda per unit increase of the multiplier of row `ap` while the
  // working set stays active and stationarity holds.
  void step_direction(const Vector& ap, Vector& dz, Vector& dlambda) const {
    const Vector hinv_ap = llt_.solve(ap);
    if (working_.empty()) {
      dlambda.resize(0);
      dz = -hinv_ap;
      return;
    }
    const Matrix n = rows(working_);
    const Matrix hinv_nt = llt_.solve(n.transpose());
    const Matrix s = n * hinv_nt;
    dlambda = -s.ldlt().solve(n * hinv_ap);
    dz = -(hinv_ap + hinv_nt * dlambda);
  }

  Matrix rows(const std::vector<int>& idx) const {
    Matrix n(idx.size(), a_.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) n.row(i) = a_.row(idx[i]);
    return n;
  }

  int most_violated() const {
    int best = -1;
    double worst = 0.0;
    for (int i = 0; i < a_.rows(); ++i) {
      if (std::find(working_.begin(), working_.end(), i) != working_.end()) continue;
      const double norm = std::max(a_.row(i).norm(), 1e-300);
      const double viol = (a_.row(i).dot(z_) - b_[i]) / norm;
      if (viol > opt_.tol * 1e-2 && viol > worst) {
        worst = viol;
        best = i;
      }
    }
    return best;
  }

  void drop(int pos) {
    working_.erase(working_.begin() + pos);
    lambda_.erase(lambda_.begin() + pos);
  }

  // Minimizer with `warm` rows as equalities, shedding negative multipliers.
  void warm_start(std::span<const int> warm) {
    std::vector<int> set;
    for (int idx : warm) {
      if (idx < 0 || idx >= a_.rows()) continue;
      if (std::find(set.begin(), set.end(), idx) != set.end()) continue;
      std::vector<int> trial = set;
      trial.push_back(idx);
      const Matrix n = rows(trial);
      Eigen::FullPivLU<Matrix> lu(n);
      lu.setThreshold(1e-10);
      if (lu.rank() == static_cast<Eigen::Index>(trial.size())) set = trial;
    }
    while (!set.empty()) {
      const Matrix n = rows(set);
      const Matrix hinv_nt = llt_.solve(n.transpose());
      const Matrix s = n * hinv_nt;
      Vector bw(set.size());
      for (std::size_t i = 0; i < set.size(); ++i) bw[i] = b_[set[i]];
      const Vector lam = s.ldlt().solve(-bw - n * llt_.solve(c_));
      Eigen::Index worst;
      if (lam.minCoeff(&worst) < 0.0) {
        set.erase(set.begin() + worst);
        continue;
      }
      working_ = set;
      lambda_.assign(lam.data(), lam.data() + lam.size());
      z_ = -llt_.solve(c_ + n.transpose() * lam);
      return;
    }
  }

  QPSolution finish(QPStatus status, int iterations, Vector certificate) const {
    QPSolution sol;
    sol.status = status;
    sol.iterations = iterations;
    sol.z = z_;
    sol.duals = Vector::Zero(a_.rows());
    for (std::size_t i = 0; i < working_.size(); ++i) {
      sol.duals[working_[i]] = std::max(0.0, lambda_[i]);
    }
    sol.active = working_;
    std::sort(sol.active.begin(), sol.active.end());
    sol.certificate = std::move(certificate);
    return sol;
  }

  const Matrix& h_;
  const Vector& c_;
  const Matrix& a_;
  const Vector& b_;
  QPOptions opt_;
  Eigen::LLT<Matrix> llt_;
  Vector z_;
  std::vector<int> working_;
  std::vector<double> lambda_;
};

struct Reduced {
  Matrix a;
  Vector b;
  std::vector<int> original;  // reduced row -> problem row
  bool trivially_infeasible = false;
  int infeasible_row = -1;
};

// Drops zero rows and merges rows that are positive multiples of each other,
// keeping the tightest.
Reduced deduplicate(const QPProblem& p) {
  Reduced r;
  std::vector<Vector> normals;
  std::vector<double> offsets;
  int merged = 0;
  for (int i = 0; i < p.rows(); ++i) {
    const double norm = p.constraints.row(i).norm();
    if (norm == 0.0) {
      if (p.bounds[i] < 0.0) {
        r.trivially_infeasible = true;
        r.infeasible_row = i;
      }
      continue;
    }
    const Vector normal = p.constraints.row(i).transpose() / norm;
    const double offset = p.bounds[i] / norm;
    bool duplicate = false;
    for (std::size_t k = 0; k < normals.size(); ++k) {
      if ((normals[k] - normal).lpNorm<Eigen::Infinity>() <= 1e-12) {
        duplicate = true;
        ++merged;
        if (offset < offsets[k]) {
          offsets[k] = offset;
          r.original[k] = i;
        }
        break;
      }
    }
    if (!duplicate) {
      normals.push_back(normal);
      offsets.push_back(offset);
      r.original.push_back(i);
    }
  }
  if (merged > 0) {
    log::warning("solve_qp: merged " + std::to_string(merged) +
                 " duplicate constraint row(s)");
  }
  r.a.resize(normals.size(), p.variables());
  r.b.resize(normals.size());
  for (std::size_t k = 0; k < normals.size(); ++k) {
    r.a.row(k) = p.constraints.row(r.original[k]);
    r.b[k] = p.bounds[r.original[k]];
  }
  return r;
}

QPSolution expand(const QPProblem& p, const Reduced& r, QPSolution sol) {
  Vector duals = Vector::Zero(p.rows());
  for (std::size_t k = 0; k < r.original.size(); ++k) duals[r.original[k]] = sol.duals[k];
  std::vector<int> active;
  for (int k : sol.active) active.push_back(r.original[k]);
  std::sort(active.begin(), active.end());
  if (sol.certificate.size() > 0) {
    Vector y = Vector::Zero(p.rows());
    for (std::size_t k = 0; k < r.original.size(); ++k) y[r.original[k]] = sol.certificate[k];
    sol.certificate = y;
  }
  sol.duals = duals;
  sol.active = active;
  return sol;
}

}  // namespace

QPSolution solve_qp(const QPProblem& problem, const QPOptions& options,
                    std::span<const int> warm_active) {
  require(options.tol > 0.0 && options.max_iter >= 1, "invalid QP options");
  const Reduced reduced = deduplicate(problem);
  if (reduced.trivially_infeasible) {
    QPSolution sol;
    sol.status = QPStatus::infeasible;
    sol.z = Vector::Zero(problem.variables());
    sol.duals = Vector::Zero(problem.rows());
    sol.certificate = Vector::Zero(problem.rows());
    sol.certificate[reduced.infeasible_row] = 1.0;
    sol.kkt_residual = std::numeric_limits<double>::infinity();
    return sol;
  }
  std::vector<int> warm;
  for (int idx : warm_active) {
    for (std::size_t k = 0; k < reduced.original.size(); ++k) {
      if (reduced.original[k] == idx) warm.push_back(static_cast<int>(k));
    }
  }

  QPSolution sol;
  {
    DualActiveSet strict(problem.hessian, problem.linear, reduced.a, reduced.b, options);
    const double min_eig =
        Eigen::SelfAdjointEigenSolver<Matrix>(problem.hessian, Eigen::EigenvaluesOnly)
            .eigenvalues()
            .minCoeff();
    const bool strictly_convex =
        strict.factorized() && min_eig > 1e-12 * std::max(1.0, problem.hessian.norm());
    if (strictly_convex) {
      sol = strict.solve(warm);
    } else {
      // Proximal point: each subproblem adds rho/2 |z - z_k|^2.
      const double rho = 1e-3 * std::max(1.0, problem.hessian.norm());
      const Matrix h_prox = problem.hessian + rho * Matrix::Identity(problem.variables(), problem.variables());
      Vector z = Vector::Zero(problem.variables());
      int total = 0;
      sol.status = QPStatus::max_iter;
      for (int outer = 0; outer < options.max_iter; ++outer) {
        const Vector c_prox = problem.linear - rho * z;
        DualActiveSet inner(h_prox, c_prox, reduced.a, reduced.b, options);
        QPSolution step = inner.solve(warm);
        total += step.iterations;
        if (step.status != QPStatus::optimal) {
          sol = step;
          break;
        }
        const double move = (step.z - z).norm();
        z = step.z;
        warm = step.active;
        sol = step;
        if (move <= 1e-2 * options.tol * (1.0 + z.norm())) break;
        sol.status = QPStatus::max_iter;
      }
      sol.iterations = total;
    }
  }
  sol = expand(problem, reduced, std::move(sol));
  sol.kkt_residual = kkt_residual(problem, sol.z, sol.duals);
  if (sol.status == QPStatus::optimal && !(sol.kkt_residual <= options.tol * (1.0 + sol.z.lpNorm<Eigen::Infinity>()))) {
    std::ostringstream os;
    os << "solve_qp: KKT residual " << sol.kkt_residual << " above tolerance";
    log::warning(os.str());
  }
  return sol;
}

void write_qp_debug(std::ostream& os, const QPProblem& p, const QPSolution& s) {
  const Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, " ", "\n");
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "qp " << p.variables() << ' ' << p.rows() << '\n';
  os << "H\n" << p.hessian.format(fmt) << '\n';
  os << "c\n" << p.linear.transpose().format(fmt) << '\n';
  os << "A\n";
  if (p.rows() > 0) os << p.constraints.format(fmt) << '\n';
  os << "b\n";
  if (p.rows() > 0) os << p.bounds.transpose().format(fmt) << '\n';
  os << "status " << to_string(s.status) << '\n';
  os << "iterations " << s.iterations << '\n';
  os << "kkt_residual " << s.kkt_residual << '\n';
  os << "z\n" << s.z.transpose().format(fmt) << '\n';
  os << "duals\n";
  if (p.rows() > 0) os << s.duals.transpose().format(fmt) << '\n';
  os << "active";
  for (int i : s.active) os << ' ' << i;
  os << '\n';
}

// ------------------------------------------------------------- closed form

namespace {

Matrix bordered_matrix(const Matrix& f1, const Matrix& k, double kappa) {
  const Eigen::Index m_tasks = f1.rows();
  const Eigen::Index r = k.rows();
  Matrix a1(m_tasks + r, m_tasks + r);
  a1.topLeftCorner(m_tasks, m_tasks) =
      Matrix::Identity(m_tasks, m_tasks) / kappa + f1 * f1.transpose();
  if (r > 0) {
    a1.topRightCorner(m_tasks, r) = -k.transpose() / kappa;
    a1.bottomLeftCorner(r, m_tasks) = k;
    a1.bottomRightCorner(r, r) = -k * k.transpose();
  }
  return a1;
}

double condition_number(const Matrix& m) {
  const Vector sv = Eigen::JacobiSVD<Matrix>(m).singularValues();
  const double smallest = sv[sv.size() - 1];
  return smallest > 0.0 ? sv[0] / smallest : std::numeric_limits<double>::infinity();
}

}  // namespace

ClosedFormSolution closed_form_all_active(const Vector& f0, const Matrix& f1,
                                          const Vector& sigma, const Matrix& k,
                                          double kappa) {
  const Eigen::Index m_tasks = f1.rows();
  require(m_tasks >= 1, "closed form needs at least one task");
  require(f0.size() == m_tasks && sigma.size() == m_tasks,
          "closed form: f0 and sigma must have one entry per task");
  require(k.rows() == 0 || k.cols() == m_tasks,
          "closed form: prioritization matrix must have one column per task");
  require(kappa > 0.0, "kappa must be positive");
  const Eigen::Index r = k.rows();
  const Matrix a1 = bordered_matrix(f1, k, kappa);
  ClosedFormSolution out;
  out.condition = condition_number(a1);
  if (!(out.condition < 1e12)) {
    std::ostringstream os;
    os << "closed_form_all_active: KKT matrix is singular (condition "
       << out.condition << "); the prioritization matrix is likely row-rank deficient";
    throw NumericalError(os.str(), out.condition);
  }
  Vector b0 = Vector::Zero(m_tasks + r);
  b0.head(m_tasks) = f0 + sigma;
  const Vector y = a1.partialPivLu().solve(b0);
  const Vector y1 = y.head(m_tasks);
  const Vector y2 = y.tail(r);
  out.u = -f1.transpose() * y1;
  out.delta = r > 0 ? Vector((y1 - k.transpose() * y2) / kappa) : Vector(y1 / kappa);
  out.eta.resize(m_tasks + r);
  out.eta.head(m_tasks) = 2.0 * y1;
  out.eta.tail(r) = -2.0 * y2;
  return out;
}

Matrix prioritized_gain(const Matrix& f1, const Matrix& k, double kappa) {
  require(kappa > 0.0, "kappa must be positive");
  const Eigen::Index m_tasks = f1.rows();
  const Matrix inv = bordered_matrix(f1, k, kappa).inverse();
  return f1 * f1.transpose() * inv.topLeftCorner(m_tasks, m_tasks);
}

}  // namespace clfstack
