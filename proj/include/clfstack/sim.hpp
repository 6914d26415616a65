#pragma once

#include "clfstack/clf.hpp"
#include "clfstack/common.hpp"
#include "clfstack/dynamics.hpp"
#include "clfstack/qp.hpp"
#include "clfstack/stack.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace clfstack {

struct ControllerParams {
  double kappa = 10.0;
  MarginMode margin;
  QPOptions qp;
  /// Reuse the previous step's active set while the priority segment is
  /// unchanged.
  bool warm_start = true;
};

struct Scenario {
  ControlAffineSystem system;
  std::vector<TaskSpec> tasks;
  PrioritySchedule schedule;
  double horizon = 45.0;
  double dt = 0.01;
  Vector x0;
  ControllerParams controller;

  std::vector<std::string> task_ids() const;
  /// horizon > 0, dt > 0, an integer number of steps, x0 of size n, unique
  /// task ids, and a schedule covering [0, horizon].
  void validate() const;
};

struct StepRecord {
  double t = 0.0;
  Vector x;
  Vector u;
  Vector values;
  Vector delta;
  Vector residual;
  /// One flag per task (row active) followed by one per priority row.
  std::vector<bool> active;
  std::vector<bool> dropped;
  QPStatus status = QPStatus::optimal;
  int iterations = 0;
  double solve_time_s = 0.0;
  int segment = 0;
};

/// One record per control step at t = 0, dt, ..., horizon. The input of the
/// last record is computed but never applied.
struct SimulationTrace {
  std::vector<std::string> task_ids;
  int state_dim = 0;
  int input_dim = 0;
  std::vector<StepRecord> records;
  bool failed = false;
  std::string failure;

  std::size_t size() const { return records.size(); }
  /// J_i over time.
  std::vector<double> series(int task) const;
  std::vector<double> times() const;
};

/// Closed loop: per step pick K from the schedule, assemble and solve the
/// stack QP, hold u for dt under RK4. Stops at the first non-optimal solve or
/// non-finite state, returning the partial trace with `failed` set.
SimulationTrace run(const Scenario& scenario);

/// Trace table: t, x_1..x_n, u_1..u_m, J_1..J_M, delta_1..delta_M,
/// residual_1..residual_M, status, iters, solve_time_s.
void write_trace_csv(std::ostream& os, const SimulationTrace& trace);
void save_trace_csv(const std::string& path, const SimulationTrace& trace);
/// Reads back what write_trace_csv wrote (activity and drop flags are not
/// part of the table and come back empty).
SimulationTrace read_trace_csv(std::istream& is);
SimulationTrace load_trace_csv(const std::string& path);

struct NullspaceReport {
  std::vector<double> times;
  std::vector<double> norms;  // |K J(t)|
  double initial = 0.0;
  double final_value = 0.0;
  /// final / initial (0 when both vanish).
  double ratio = 0.0;
  /// final <= tol (1 + initial)
  bool converged = false;
};

/// |K J(t)| over the records with t in [t_begin, t_end].
NullspaceReport check_nullspace_convergence(const SimulationTrace& trace,
                                            const PrioritizationMatrix& k,
                                            double tol, double t_begin = 0.0,
                                            double t_end = 1e300);

/// Declared behavior of one task within one schedule segment.
struct PhaseExpectation {
  enum class Kind {
    driven_to_zero,  // end <= fraction * reference
    increases,       // end > start
    bounded_away,    // min over the last `window` s > factor * fraction * reference
  };
  /// What `fraction` multiplies: the value at segment start, or the task's
  /// running maximum over [0, segment start].
  enum class Reference { segment_start, running_peak };

  int segment = 0;
  int task = 0;
  Kind kind = Kind::driven_to_zero;
  Reference reference = Reference::segment_start;
  double fraction = 0.05;
  double factor = 10.0;
  double window = 1.0;
};

struct TaskPhaseStats {
  double start = 0.0;
  double end = 0.0;
  double min = 0.0;
  double max = 0.0;
  /// Fraction of steps over which the value did not increase.
  double nonincreasing_fraction = 0.0;
};

struct ExpectationResult {
  PhaseExpectation expectation;
  std::string description;
  double value = 0.0;
  double limit = 0.0;
  bool passed = false;
};

struct PhaseReport {
  /// stats[segment][task]
  std::vector<std::vector<TaskPhaseStats>> stats;
  std::vector<ExpectationResult> results;
  bool all_passed() const;
};

PhaseReport phase_report(const SimulationTrace& trace,
                         const PrioritySchedule& schedule,
                         const std::vector<PhaseExpectation>& expectations);

/// The behavior of the three-phase formation / go-to-goal stack: phase 1
/// drives tasks 2-4 to zero while task 1 grows, phase 2 drives task 1 to
/// zero, phase 3 drives tasks 1 and 2 to zero with tasks 3 and 4 left
/// unexecuted.
std::vector<PhaseExpectation> three_phase_expectations();

void write_phase_report(std::ostream& os, const PhaseReport& report,
                        const SimulationTrace& trace);

}  // namespace clfstack
