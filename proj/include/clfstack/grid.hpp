#pragma once

#include "clfstack/common.hpp"
#include "clfstack/dynamics.hpp"
#include "clfstack/valuefn.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace clfstack {

/// Axis-aligned box sampled with `resolution[k]` points per axis (>= 2),
/// endpoints included.
struct GridSpec {
  Vector lower;
  Vector upper;
  std::vector<int> resolution;

  int dims() const { return static_cast<int>(lower.size()); }
  double spacing(int axis) const {
    return (upper[axis] - lower[axis]) / (resolution[axis] - 1);
  }
  long node_count() const;
  void validate() const;
};

/// Everything a stored grid needs besides its node values so that a later run
/// can rebuild the learning problem: termination ball, time step, action set,
/// and the weights of the quadratic stage cost  w_x |x - goal|^2 + w_u |u|^2.
struct GridMetadata {
  double termination_radius = 0.1;
  Vector goal;
  double dt = 0.05;
  std::vector<Vector> actions;
  double state_weight = 1.0;
  double input_weight = 1.0;
};

/// Value function tabulated on a regular grid, row-major with the last axis
/// varying fastest. Values are finite and nonnegative.
class GridValueFunction {
 public:
  GridValueFunction(GridSpec grid, std::vector<double> values,
                    GridMetadata meta);

  const GridSpec& grid() const { return grid_; }
  const GridMetadata& metadata() const { return meta_; }
  const std::vector<double>& values() const { return values_; }
  int dims() const { return grid_.dims(); }

  long flat_index(const std::vector<int>& multi) const;
  std::vector<int> multi_index(long flat) const;
  Vector node_state(long flat) const;

 private:
  GridSpec grid_;
  std::vector<double> values_;
  GridMetadata meta_;
};

struct GridQuery {
  double value = 0.0;
  bool out_of_domain = false;
};

struct GridGradient {
  Vector gradient;
  bool out_of_domain = false;
};

/// Multilinear interpolation. Queries outside the box are clamped onto it and
/// flagged.
GridQuery grid_eval(const GridValueFunction& gvf, const Vector& x);

/// Central differences of the interpolant with one grid spacing per axis,
/// falling back to one-sided differences where the stencil leaves the box.
GridGradient grid_gradient(const GridValueFunction& gvf, const Vector& x);

/// Subtracts the interpolated value at `x_term` from every node. Negatives no
/// smaller than -tol are clamped to zero; anything below is a NumericalError.
GridValueFunction shift_to_zero(const GridValueFunction& gvf,
                                const Vector& x_term, double tol = 1e-9);

using StageCostFn = std::function<double(const Vector& x, const Vector& u)>;

struct ValueIterationConfig {
  GridSpec grid;
  Vector goal;
  double termination_radius = 0.1;
  std::vector<Vector> actions;
  double tol = 1e-6;
  int max_sweeps = 20000;
  /// Added to the clamped successor value when x_{k+1} leaves the box.
  double boundary_penalty = 0.0;
  /// Worker threads for a sweep; 0 picks hardware concurrency.
  unsigned threads = 0;
  /// Called after every sweep with (sweep, sup-norm change, smallest
  /// per-node change). Optional.
  std::function<void(int, double, double)> on_sweep;
  /// Stored into the result's metadata.
  double state_weight = 1.0;
  double input_weight = 1.0;
};

struct ValueIterationResult {
  GridValueFunction value;
  int sweeps = 0;
  double residual = 0.0;
  /// Smallest per-node change seen over all sweeps; >= 0 means every sweep
  /// was pointwise non-decreasing.
  double min_increment = 0.0;
};

/// Jacobi value iteration
///   J_{k+1}(x) = min_u { g(x, u) dt + J_k(f(x, u)) },  J_0 = 0,
/// with J fixed at zero inside the termination ball. Successor values come
/// from multilinear interpolation of J_k; the arg-min breaks ties towards the
/// lowest action index.
ValueIterationResult value_iteration(const DiscreteSystem& dsys,
                                     const StageCostFn& stage_cost,
                                     const ValueIterationConfig& config);

/// Evenly spaced scalar actions in [lo, hi].
std::vector<Vector> scalar_action_set(double lo, double hi, int count);

/// Text artifact; see docs/formats.md.
void write_grid(std::ostream& os, const GridValueFunction& gvf);
GridValueFunction read_grid(std::istream& is);
void save_grid(const std::string& path, const GridValueFunction& gvf);
GridValueFunction load_grid(const std::string& path);

/// Provider backed by a learned grid. The grid is the value of the cost
/// w_x |x - goal|^2 + w_u |u|^2; it is divided by w_u so that the provider
/// describes the unit-input-weight problem with q = (w_x / w_u)|x - goal|^2.
class GridProvider final : public ValueFunctionProvider {
 public:
  explicit GridProvider(GridValueFunction gvf);

  int dim() const override { return gvf_.dims(); }
  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;
  double stage_cost(const Vector& x) const override;
  std::string goal_descriptor() const override;

  const GridValueFunction& grid() const { return gvf_; }

 private:
  GridValueFunction gvf_;
  double scale_;
};

}  // namespace clfstack
