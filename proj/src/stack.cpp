#include "clfstack/stack.hpp"

#include "clfstack/log.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace clfstack {

Vector embed_gradient(const TaskSpec& task, int ensemble_dim,
                      const Vector& local_gradient) {
  if (!task.robot_block) {
    require(local_gradient.size() == ensemble_dim,
            "task '" + task.id + "': gradient length must equal the ensemble dimension");
    return local_gradient;
  }
  const RobotBlock& block = *task.robot_block;
  require(block.robot >= 0 && block.size >= 1 &&
              (block.robot + 1) * block.size <= ensemble_dim,
          "task '" + task.id + "': robot block out of range");
  require(local_gradient.size() == block.size,
          "task '" + task.id + "': local gradient length must equal the block size");
  Vector out = Vector::Zero(ensemble_dim);
  out.segment(block.robot * block.size, block.size) = local_gradient;
  return out;
}

namespace {

class BlockProvider final : public ValueFunctionProvider {
 public:
  BlockProvider(TaskSpec task, int ensemble_dim)
      : task_(std::move(task)), ensemble_dim_(ensemble_dim) {
    const RobotBlock& b = *task_.robot_block;
    require(b.robot >= 0 && b.size >= 1 && (b.robot + 1) * b.size <= ensemble_dim_,
            "task '" + task_.id + "': robot block out of range");
    require(task_.provider->dim() == b.size,
            "task '" + task_.id + "': provider dimension must equal the block size");
  }

  int dim() const override { return ensemble_dim_; }
  double value(const Vector& x) const override {
    return task_.provider->value(local(x));
  }
  Vector gradient(const Vector& x) const override {
    return embed_gradient(task_, ensemble_dim_, task_.provider->gradient(local(x)));
  }
  double stage_cost(const Vector& x) const override {
    return task_.provider->stage_cost(local(x));
  }
  std::string goal_descriptor() const override {
    return "robot " + std::to_string(task_.robot_block->robot) + " " +
           task_.provider->goal_descriptor();
  }

 private:
  Vector local(const Vector& x) const {
    require(x.size() == ensemble_dim_, "ensemble state dimension mismatch");
    const RobotBlock& b = *task_.robot_block;
    return x.segment(b.robot * b.size, b.size);
  }

  TaskSpec task_;
  int ensemble_dim_;
};

}  // namespace

ProviderPtr ensemble_provider(const TaskSpec& task, int ensemble_dim) {
  require(task.provider != nullptr, "task '" + task.id + "' has no value function");
  if (!task.robot_block) {
    require(task.provider->dim() == ensemble_dim,
            "task '" + task.id + "': provider dimension must equal the ensemble dimension");
    return task.provider;
  }
  return std::make_shared<const BlockProvider>(task, ensemble_dim);
}

// ------------------------------------------------------------- priorities

namespace {

bool has_cycle(const std::vector<PriorityRelation>& relations,
               const std::vector<std::string>& order) {
  const std::size_t n = order.size();
  std::vector<std::vector<int>> edges(n);
  auto index = [&](const std::string& id) {
    return static_cast<int>(std::find(order.begin(), order.end(), id) - order.begin());
  };
  for (const auto& r : relations) edges[index(r.higher)].push_back(index(r.lower));
  std::vector<int> state(n, 0);  // 0 new, 1 on stack, 2 done
  std::function<bool(int)> visit = [&](int v) {
    state[v] = 1;
    for (int w : edges[v]) {
      if (state[w] == 1) return true;
      if (state[w] == 0 && visit(w)) return true;
    }
    state[v] = 2;
    return false;
  };
  for (std::size_t v = 0; v < n; ++v) {
    if (state[v] == 0 && visit(static_cast<int>(v))) return true;
  }
  return false;
}

}  // namespace

PrioritizationMatrix build_K(const std::vector<PriorityRelation>& relations,
                             const std::vector<std::string>& task_order) {
  PrioritizationMatrix out;
  out.k = Matrix::Zero(static_cast<Eigen::Index>(relations.size()),
                       static_cast<Eigen::Index>(task_order.size()));
  auto column = [&](const std::string& id) {
    const auto it = std::find(task_order.begin(), task_order.end(), id);
    if (it == task_order.end()) {
      throw ValidationError("priority relation refers to unknown task '" + id + "'");
    }
    return static_cast<Eigen::Index>(it - task_order.begin());
  };
  for (std::size_t r = 0; r < relations.size(); ++r) {
    const PriorityRelation& rel = relations[r];
    if (rel.higher == rel.lower) {
      throw ValidationError("task '" + rel.higher + "' cannot be prioritized over itself");
    }
    if (!(rel.scale > 0.0 && rel.scale <= 0.5)) {
      throw ValidationError("priority scale l must lie in (0, 0.5]");
    }
    if (rel.scale > 0.1) {
      log::warning("priority scale l = " + std::to_string(rel.scale) +
                   " is not much smaller than 1");
    }
    const auto row = static_cast<Eigen::Index>(r);
    out.k(row, column(rel.higher)) = -1.0;
    out.k(row, column(rel.lower)) = rel.scale;
  }
  if (has_cycle(relations, task_order)) {
    log::warning("priority relations contain a cycle; the stack is not realizable");
  }
  return out;
}

void PrioritySchedule::validate(double horizon) const {
  if (segments.empty()) throw ValidationError("schedule has no segments");
  if (segments.front().t_start != 0.0) {
    throw ValidationError("schedule must start at t = 0");
  }
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (!(segments[s].t_end > segments[s].t_start)) {
      throw ValidationError("schedule segment " + std::to_string(s) + " is empty");
    }
    if (s > 0 && segments[s].t_start != segments[s - 1].t_end) {
      throw ValidationError("schedule segments must be contiguous and non-overlapping");
    }
  }
  if (horizon > 0.0 && std::abs(segments.back().t_end - horizon) > 1e-9) {
    throw ValidationError("schedule must end at the simulation horizon");
  }
}

int PrioritySchedule::segment_at(double t) const {
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const bool last = s + 1 == segments.size();
    if (t >= segments[s].t_start &&
        (t < segments[s].t_end || (last && t <= segments[s].t_end))) {
      return static_cast<int>(s);
    }
  }
  return -1;
}

PrioritySchedule constant_schedule(std::vector<PriorityRelation> relations,
                                   double horizon) {
  PrioritySchedule s;
  s.segments.push_back({0.0, horizon, std::move(relations)});
  return s;
}

PrioritizationMatrix schedule_at(const PrioritySchedule& schedule, double t,
                                 const std::vector<std::string>& task_order) {
  const int s = schedule.segment_at(t);
  if (s < 0) {
    std::ostringstream os;
    os << "time " << t << " is outside every schedule segment";
    throw ValidationError(os.str());
  }
  return build_K(schedule.segments[s].relations, task_order);
}

// ---------------------------------------------------------------- assembly

Vector AssembledQP::task_residuals(const Vector& z) const {
  const Vector u = z.head(input_dim);
  const Vector delta = z.segment(input_dim, task_count);
  return f0hat + f1hat * u + margin - delta;
}

AssembledQP assemble_qp(const std::vector<TaskSpec>& tasks,
                        const ControlAffineSystem& sys, const Vector& x,
                        const PrioritizationMatrix& k, double kappa,
                        MarginMode margin) {
  require(!tasks.empty(), "assemble_qp needs at least one task");
  require(kappa > 0.0, "kappa must be positive");
  require(x.size() == sys.state_dim(), "state dimension mismatch");
  const int m = sys.input_dim();
  const int n_tasks = static_cast<int>(tasks.size());
  require(k.rows() == 0 || k.tasks() == n_tasks,
          "prioritization matrix must have one column per task");
  if (margin.kind == MarginMode::Kind::class_k) {
    require(margin.alpha > 0.0, "class-K gain alpha must be positive");
  }

  AssembledQP out;
  out.input_dim = m;
  out.task_count = n_tasks;
  out.task_row.assign(n_tasks, -1);
  out.singular.assign(n_tasks, false);
  out.values = Vector::Zero(n_tasks);
  out.lambda = Vector::Ones(n_tasks);
  out.margin = Vector::Zero(n_tasks);
  out.f0hat = Vector::Zero(n_tasks);
  out.f1hat = Matrix::Zero(n_tasks, m);

  const Vector f0 = sys.drift(x);
  const Matrix f1 = sys.input_matrix(x);
  int kept = 0;
  for (int i = 0; i < n_tasks; ++i) {
    const ProviderPtr provider = ensemble_provider(tasks[i], sys.state_dim());
    tasks[i].clf.validate();
    const Vector grad = provider->gradient(x);
    LieDerivatives lie;
    lie.lf0 = grad.dot(f0);
    lie.lf1 = grad.transpose() * f1;
    out.values[i] = provider->value(x);
    const double q = provider->stage_cost(x);
    if (lie.lf1.norm() <= tasks[i].clf.gradient_epsilon) {
      out.singular[i] = true;
      out.margin[i] = margin.kind == MarginMode::Kind::sigma ? sigma(lie, q)
                                                             : margin.alpha * out.values[i];
      out.f0hat[i] = lie.lf0;
      continue;
    }
    if (margin.kind == MarginMode::Kind::sigma) {
      out.lambda[i] = std::clamp(2.0 * sontag_gain(lie, q), tasks[i].clf.lambda_min,
                                 tasks[i].clf.lambda_max);
      out.margin[i] = sigma(lie, q);
    } else {
      out.margin[i] = margin.alpha * out.values[i];
    }
    out.f0hat[i] = lie.lf0 / out.lambda[i];
    out.f1hat.row(i) = lie.lf1 / out.lambda[i];
    out.task_row[i] = kept++;
  }
  if (kept == 0) {
    log::write(log::Level::debug, "assemble_qp: every task has a singular gradient; u = 0");
  }

  const int d = m + n_tasks;
  const int rows = kept + k.rows();
  Matrix a = Matrix::Zero(rows, d);
  Vector b = Vector::Zero(rows);
  for (int i = 0; i < n_tasks; ++i) {
    const int r = out.task_row[i];
    if (r < 0) continue;
    a.block(r, 0, 1, m) = out.f1hat.row(i);
    a(r, m + i) = -1.0;
    b[r] = -out.margin[i] - out.f0hat[i];
  }
  out.priority_row_offset = kept;
  if (k.rows() > 0) a.block(kept, m, k.rows(), n_tasks) = -k.k;

  Matrix h = Matrix::Zero(d, d);
  h.diagonal().head(m).setConstant(2.0);
  h.diagonal().tail(n_tasks).setConstant(2.0 * kappa);
  out.problem = QPProblem(std::move(h), Vector::Zero(d), std::move(a), std::move(b));
  return out;
}

}  // namespace clfstack
