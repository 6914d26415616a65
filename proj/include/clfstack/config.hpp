#pragma once

#include "clfstack/grid.hpp"
#include "clfstack/sim.hpp"

#include <optional>
#include <string>
#include <vector>

namespace clfstack {

struct SystemConfig {
  /// single_integrator | double_integrator | linear
  std::string type = "single_integrator";
  int robot_count = 1;
  int workspace_dim = 2;
  /// Only for type "linear".
  Matrix a;
  Matrix b;

  bool operator==(const SystemConfig& o) const;
};

struct TaskConfig {
  std::string id;
  /// goto_goal | formation | grid_value | lqr
  std::string type;

  // goto_goal
  Vector goal;
  double c = 1.0;

  // formation: either a named shape or an explicit weight matrix
  std::string shape = "hexagon";
  double side = 1.0;
  Matrix weights;
  double energy_weight = 0.01;
  double cost_weight = 0.01;

  // grid_value: artifact path, relative to the config file
  std::string path;

  // lqr (R = I)
  Matrix q;

  std::optional<int> robot_block;

  bool operator==(const TaskConfig& o) const;
};

struct RelationConfig {
  std::string higher;
  std::string lower;
  bool operator==(const RelationConfig&) const = default;
};

struct SegmentConfig {
  double t_start = 0.0;
  double t_end = 0.0;
  double l = 0.05;
  std::vector<RelationConfig> relations;
  bool operator==(const SegmentConfig&) const = default;
};

struct ControllerConfig {
  double kappa = 10.0;
  double eps_grad = 1e-8;
  double lambda_min = 1e-3;
  double lambda_max = 1e3;
  /// sigma | class_k
  std::string margin_mode = "sigma";
  double alpha = 1.0;
  bool operator==(const ControllerConfig&) const = default;
};

struct SimulationConfig {
  double dt = 0.01;
  double horizon = 10.0;
  Vector x0;
  bool operator==(const SimulationConfig& o) const;
};

struct LearningConfig {
  Vector lower;
  Vector upper;
  std::vector<int> resolution;
  double action_lower = -1.0;
  double action_upper = 1.0;
  int action_count = 21;
  double dt = 0.05;
  double tol = 1e-6;
  int max_sweeps = 20000;
  double termination_radius = 0.1;
  /// Defaults to the origin.
  Vector goal;
  double state_weight = 1.0;
  double input_weight = 1.0;
  double boundary_penalty = 0.0;
  bool operator==(const LearningConfig& o) const;
};

struct OutputConfig {
  std::string dir = "out";
  std::string trace = "trace.csv";
  std::string grid = "grid.txt";
  bool plot = true;
  /// Pass/fail checks appended to the phase report by `simulate`:
  /// none | three_phase | nullspace
  std::string checks = "none";
  bool operator==(const OutputConfig&) const = default;
};

struct ScenarioConfig {
  std::string name;
  std::string description;
  SystemConfig system;
  std::vector<TaskConfig> tasks;
  std::vector<SegmentConfig> schedule;
  ControllerConfig controller;
  SimulationConfig simulation;
  std::optional<LearningConfig> learning;
  OutputConfig output;
  /// Directory relative paths resolve against; not part of the document.
  std::string base_dir = ".";

  bool operator==(const ScenarioConfig& o) const;
};

/// Parses a JSON scenario document. Throws ValidationError naming the
/// offending key for unknown keys, wrong types, undefined task ids, and
/// out-of-range values.
ScenarioConfig parse_config(const std::string& text, const std::string& base_dir = ".");
ScenarioConfig load_config(const std::string& path);
/// Canonical JSON text: every field written explicitly, fixed key order.
std::string serialize_config(const ScenarioConfig& config);

ControlAffineSystem build_system(const ScenarioConfig& config);
/// Loads grid artifacts and solves Riccati equations as needed.
Scenario build_scenario(const ScenarioConfig& config);

struct LearningProblem {
  DiscreteSystem system;
  StageCostFn stage_cost;
  ValueIterationConfig vi;
};
/// The value-iteration setup of the `learning` section.
LearningProblem build_learning(const ScenarioConfig& config);

/// Path of `relative` against the config's base directory (absolute paths
/// pass through).
std::string resolve_path(const ScenarioConfig& config, const std::string& relative);

}  // namespace clfstack
