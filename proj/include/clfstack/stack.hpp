#pragma once

#include "clfstack/clf.hpp"
#include "clfstack/common.hpp"
#include "clfstack/dynamics.hpp"
#include "clfstack/qp.hpp"
#include "clfstack/valuefn.hpp"

#include <optional>
#include <string>
#include <vector>

namespace clfstack {

/// Contiguous slice [robot * size, (robot + 1) * size) of the ensemble state.
struct RobotBlock {
  int robot = 0;
  int size = 2;
};

/// One task of a stack. `provider` is defined on the robot block when
/// `robot_block` is set, otherwise on the whole ensemble state.
struct TaskSpec {
  std::string id;
  ProviderPtr provider;
  std::optional<RobotBlock> robot_block;
  ClfParams clf;
};

/// Gradient of a single-robot task on the ensemble: zero except on the
/// task's robot block. Multi-robot tasks pass through unchanged.
Vector embed_gradient(const TaskSpec& task, int ensemble_dim,
                      const Vector& local_gradient);

/// The task's value function lifted to the ensemble state.
ProviderPtr ensemble_provider(const TaskSpec& task, int ensemble_dim);

/// `higher` is executed at higher priority than `lower`:
///   delta_higher <= scale * delta_lower.
struct PriorityRelation {
  std::string higher;
  std::string lower;
  double scale = 0.05;
};

/// Rows of K; row r encodes relation r as K_r delta >= 0 with -1 in the
/// column of the higher-priority task and +scale in the column of the lower.
struct PrioritizationMatrix {
  Matrix k;

  int rows() const { return static_cast<int>(k.rows()); }
  int tasks() const { return static_cast<int>(k.cols()); }
};

/// Throws ValidationError on unknown ids, self relations, or scale outside
/// (0, 0.5]. Warns when scale > 0.1 or the relations contain a cycle.
PrioritizationMatrix build_K(const std::vector<PriorityRelation>& relations,
                             const std::vector<std::string>& task_order);

struct ScheduleSegment {
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<PriorityRelation> relations;
};

/// Time-indexed priority stacks. Segments are half-open [t_start, t_end)
/// except the last, which also contains its end time.
struct PrioritySchedule {
  std::vector<ScheduleSegment> segments;

  /// Contiguous, increasing, starting at 0 and ending at `horizon` (when
  /// horizon > 0).
  void validate(double horizon = -1.0) const;
  int segment_at(double t) const;
};

PrioritySchedule constant_schedule(std::vector<PriorityRelation> relations,
                                   double horizon);

PrioritizationMatrix schedule_at(const PrioritySchedule& schedule, double t,
                                 const std::vector<std::string>& task_order);

/// The stack QP at one state, with decision vector z = (u, delta):
///   min |u|^2 + kappa |delta|^2
///   s.t. (1/lambda_i)(L_f0 J_i + L_f1 J_i u) <= -sigma_i + delta_i
///        K delta >= 0
/// In class-K mode the task rows read L_f0 J_i + L_f1 J_i u <= -alpha J_i +
/// delta_i. Tasks with a singular gradient get no row.
struct AssembledQP {
  QPProblem problem;
  int input_dim = 0;
  int task_count = 0;
  /// Row of each task in `problem`, or -1 when dropped.
  std::vector<int> task_row;
  std::vector<bool> singular;
  /// Per task: J_i(x), lambda_i, margin (sigma_i or alpha J_i), and the scaled
  /// Lie derivatives f0hat_i = L_f0 J_i / lambda_i, f1hat_i = L_f1 J_i / lambda_i.
  Vector values;
  Vector lambda;
  Vector margin;
  Vector f0hat;
  Matrix f1hat;
  int priority_row_offset = 0;

  /// Task-row residuals (1/lambda_i)(L_f0 J_i + L_f1 J_i u) + margin_i - delta_i
  /// for a decision vector z = (u, delta); <= 0 when satisfied.
  Vector task_residuals(const Vector& z) const;
};

AssembledQP assemble_qp(const std::vector<TaskSpec>& tasks,
                        const ControlAffineSystem& sys, const Vector& x,
                        const PrioritizationMatrix& k, double kappa,
                        MarginMode margin = {});

}  // namespace clfstack
