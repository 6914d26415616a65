#pragma once

#include "clfstack/common.hpp"
#include "clfstack/dynamics.hpp"
#include "clfstack/valuefn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace clfstack {

struct CommandOptions {
  std::string config;
  /// Overrides output.dir of the config when set.
  std::string out;
  std::uint64_t seed = 1;
  bool quiet = false;
  bool no_plot = false;
  bool sweep = false;
  std::string suite = "all";
  std::string trace;
  std::string scenario_dir;
};

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;

int cmd_learn(const CommandOptions& opt);
int cmd_simulate(const CommandOptions& opt);
int cmd_compare_appendix_a(const CommandOptions& opt);
int cmd_verify(const CommandOptions& opt);
int cmd_plot(const CommandOptions& opt);

/// Three controllers for a linear plant with V = x'Px: (a) u* = -B'Px,
/// (b) the min-norm controller on x'Px, (c) the min-norm controller on a
/// learned value function.
struct ControllerComparison {
  std::vector<double> t;
  /// Optimal closed loop, and (b), (c) evaluated at its states.
  std::vector<Vector> x_opt;
  std::vector<Vector> u_opt;
  std::vector<Vector> u_quad;
  std::vector<Vector> u_learned;
  /// (b) and (c) each in their own closed loop.
  std::vector<Vector> x_quad_own;
  std::vector<Vector> u_quad_own;
  std::vector<Vector> x_learned_own;
  std::vector<Vector> u_learned_own;
  /// max |u_a - u_b| and max |u_a - u_c| at the states of the optimal loop.
  double deviation_quad = 0.0;
  double deviation_learned = 0.0;
  /// Time-aligned max |u_a(t) - u_c(t)| with every controller in its own loop.
  double deviation_learned_own = 0.0;
};

ControllerComparison compare_controllers(const ControlAffineSystem& sys, const Matrix& b,
                                         const Matrix& p, const Matrix& q,
                                         const ProviderPtr& learned, const Vector& x0,
                                         double horizon, double dt);

}  // namespace clfstack
