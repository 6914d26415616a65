#include "clfstack/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

namespace clfstack {

long GridSpec::node_count() const {
  long count = 1;
  for (int r : resolution) count *= r;
  return count;
}

void GridSpec::validate() const {
  require(lower.size() >= 1, "grid must have at least one axis");
  require(upper.size() == lower.size() &&
              static_cast<Eigen::Index>(resolution.size()) == lower.size(),
          "grid bounds and resolution must have the same dimension");
  for (int k = 0; k < dims(); ++k) {
    require(upper[k] > lower[k], "grid upper bound must exceed lower bound");
    require(resolution[k] >= 2, "grid resolution must be at least 2 per axis");
  }
}

GridValueFunction::GridValueFunction(GridSpec grid, std::vector<double> values,
                                     GridMetadata meta)
    : grid_(std::move(grid)), values_(std::move(values)), meta_(std::move(meta)) {
  grid_.validate();
  require(static_cast<long>(values_.size()) == grid_.node_count(),
          "grid value count does not match resolution");
  for (double v : values_) {
    require(!std::isnan(v), "grid values contain NaN");
    require(std::isfinite(v) && v >= 0.0,
            "grid values must be finite and nonnegative");
  }
  if (meta_.goal.size() == 0) meta_.goal = Vector::Zero(grid_.dims());
  require(meta_.goal.size() == grid_.dims(), "grid goal dimension mismatch");
}

long GridValueFunction::flat_index(const std::vector<int>& multi) const {
  long flat = 0;
  for (int k = 0; k < dims(); ++k) flat = flat * grid_.resolution[k] + multi[k];
  return flat;
}

std::vector<int> GridValueFunction::multi_index(long flat) const {
  std::vector<int> multi(dims());
  for (int k = dims() - 1; k >= 0; --k) {
    multi[k] = static_cast<int>(flat % grid_.resolution[k]);
    flat /= grid_.resolution[k];
  }
  return multi;
}

Vector GridValueFunction::node_state(long flat) const {
  const std::vector<int> multi = multi_index(flat);
  Vector x(dims());
  for (int k = 0; k < dims(); ++k) {
    x[k] = grid_.lower[k] + multi[k] * grid_.spacing(k);
  }
  return x;
}

namespace {

// Interpolation stencil: the 2^d cell corners around a (clamped) point.
struct Stencil {
  std::vector<long> nodes;
  std::vector<double> weights;
  bool out_of_domain = false;
};

Stencil make_stencil(const GridSpec& grid, const Vector& x) {
  const int d = grid.dims();
  require(x.size() == d, "query dimension does not match grid");
  std::vector<int> base(d);
  std::vector<double> frac(d);
  Stencil s;
  for (int k = 0; k < d; ++k) {
    double xk = x[k];
    if (std::isnan(xk)) throw ContractViolation("grid query contains NaN");
    if (xk < grid.lower[k] || xk > grid.upper[k]) {
      s.out_of_domain = true;
      xk = std::clamp(xk, grid.lower[k], grid.upper[k]);
    }
    double pos = (xk - grid.lower[k]) / grid.spacing(k);
    const double nearest = std::round(pos);
    if (std::abs(pos - nearest) < 1e-9) pos = nearest;
    int cell = static_cast<int>(std::floor(pos));
    cell = std::clamp(cell, 0, grid.resolution[k] - 2);
    base[k] = cell;
    frac[k] = pos - cell;
  }
  const int corners = 1 << d;
  s.nodes.reserve(corners);
  s.weights.reserve(corners);
  for (int c = 0; c < corners; ++c) {
    long flat = 0;
    double w = 1.0;
    for (int k = 0; k < d; ++k) {
      const int bit = (c >> (d - 1 - k)) & 1;
      flat = flat * grid.resolution[k] + base[k] + bit;
      w *= bit ? frac[k] : 1.0 - frac[k];
    }
    if (w == 0.0) continue;
    s.nodes.push_back(flat);
    s.weights.push_back(w);
  }
  return s;
}

double apply(const Stencil& s, const std::vector<double>& values) {
  double v = 0.0;
  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    v += s.weights[i] * values[s.nodes[i]];
  }
  return v;
}

}  // namespace

GridQuery grid_eval(const GridValueFunction& gvf, const Vector& x) {
  const Stencil s = make_stencil(gvf.grid(), x);
  const double v = apply(s, gvf.values());
  require(!std::isnan(v), "grid interpolation produced NaN");
  return {v, s.out_of_domain};
}

GridGradient grid_gradient(const GridValueFunction& gvf, const Vector& x) {
  const GridSpec& grid = gvf.grid();
  const int d = grid.dims();
  require(x.size() == d, "query dimension does not match grid");
  GridGradient out;
  out.gradient.resize(d);
  Vector clamped = x;
  for (int k = 0; k < d; ++k) {
    if (x[k] < grid.lower[k] || x[k] > grid.upper[k]) out.out_of_domain = true;
    clamped[k] = std::clamp(x[k], grid.lower[k], grid.upper[k]);
  }
  for (int k = 0; k < d; ++k) {
    const double h = grid.spacing(k);
    Vector lo = clamped, hi = clamped;
    lo[k] = std::max(grid.lower[k], clamped[k] - h);
    hi[k] = std::min(grid.upper[k], clamped[k] + h);
    const double span = hi[k] - lo[k];
    out.gradient[k] = (grid_eval(gvf, hi).value - grid_eval(gvf, lo).value) / span;
  }
  return out;
}

GridValueFunction shift_to_zero(const GridValueFunction& gvf,
                                const Vector& x_term, double tol) {
  const GridQuery at = grid_eval(gvf, x_term);
  require(!at.out_of_domain, "shift_to_zero: termination state outside the grid");
  std::vector<double> shifted = gvf.values();
  for (double& v : shifted) {
    v -= at.value;
    if (v < -tol) {
      throw NumericalError(
          "shift_to_zero: value function has nodes below its value at the "
          "termination state",
          v);
    }
    if (v < 0.0) v = 0.0;
  }
  return GridValueFunction(gvf.grid(), std::move(shifted), gvf.metadata());
}

std::vector<Vector> scalar_action_set(double lo, double hi, int count) {
  require(count >= 1, "action count must be positive");
  require(hi >= lo, "action range is empty");
  std::vector<Vector> actions;
  actions.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double a = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
    actions.push_back(Vector::Constant(1, a));
  }
  return actions;
}

// ---------------------------------------------------------- value iteration

namespace {

// Successor data for one (node, action) pair, fixed across sweeps.
struct Transition {
  double cost;     // g(x, u) dt, plus the boundary penalty when clamped
  int first;       // offset into the stencil arrays
  int count;
};

}  // namespace

ValueIterationResult value_iteration(const DiscreteSystem& dsys,
                                     const StageCostFn& stage_cost,
                                     const ValueIterationConfig& config) {
  const GridSpec& grid = config.grid;
  grid.validate();
  const int d = grid.dims();
  require(d == dsys.base.state_dim(), "grid dimension must equal the state dimension");
  require(!config.actions.empty(), "action set must be nonempty");
  for (const Vector& a : config.actions) {
    require(a.size() == dsys.base.input_dim(), "action dimension must equal the input dimension");
  }
  require(config.tol > 0.0, "value iteration tolerance must be positive");
  require(config.max_sweeps >= 1, "max_sweeps must be positive");
  require(config.termination_radius >= 0.0, "termination radius must be nonnegative");
  require(config.boundary_penalty >= 0.0, "boundary penalty must be nonnegative");
  const Vector goal = config.goal.size() ? config.goal : Vector::Zero(d);
  require(goal.size() == d, "goal dimension must equal the state dimension");

  GridMetadata meta;
  meta.termination_radius = config.termination_radius;
  meta.goal = goal;
  meta.dt = dsys.dt;
  meta.actions = config.actions;
  meta.state_weight = config.state_weight;
  meta.input_weight = config.input_weight;

  const long nodes = grid.node_count();
  const int n_actions = static_cast<int>(config.actions.size());

  // Geometry helper for node coordinates.
  const GridValueFunction geometry(grid, std::vector<double>(nodes, 0.0), meta);

  std::vector<char> terminal(nodes, 0);
  std::vector<long> active;
  for (long i = 0; i < nodes; ++i) {
    if ((geometry.node_state(i) - goal).norm() <= config.termination_radius) {
      terminal[i] = 1;
    } else {
      active.push_back(i);
    }
  }

  std::vector<Transition> transitions;
  std::vector<long> stencil_nodes;
  std::vector<double> stencil_weights;
  transitions.reserve(active.size() * n_actions);
  for (long node : active) {
    const Vector x = geometry.node_state(node);
    for (const Vector& u : config.actions) {
      const double g = stage_cost(x, u);
      if (!(g >= 0.0)) {
        throw ContractViolation("stage cost must be nonnegative (got " +
                                std::to_string(g) + ")");
      }
      const Stencil s = make_stencil(grid, dsys.map(x, u));
      Transition t{g * dsys.dt, static_cast<int>(stencil_nodes.size()),
                   static_cast<int>(s.nodes.size())};
      if (s.out_of_domain) t.cost += config.boundary_penalty;
      stencil_nodes.insert(stencil_nodes.end(), s.nodes.begin(), s.nodes.end());
      stencil_weights.insert(stencil_weights.end(), s.weights.begin(), s.weights.end());
      transitions.push_back(t);
    }
  }

  std::vector<double> current(nodes, 0.0), next(nodes, 0.0);
  std::vector<double> change(active.size(), 0.0);

  auto sweep_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t a = begin; a < end; ++a) {
      const Transition* row = &transitions[a * n_actions];
      double best = std::numeric_limits<double>::infinity();
      for (int k = 0; k < n_actions; ++k) {
        const Transition& t = row[k];
        double v = t.cost;
        for (int c = 0; c < t.count; ++c) {
          v += stencil_weights[t.first + c] * current[stencil_nodes[t.first + c]];
        }
        if (v < best) best = v;  // strict: lowest index wins ties
      }
      next[active[a]] = best;
      change[a] = best - current[active[a]];
    }
  };

  unsigned workers = config.threads ? config.threads : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(active.size() / 256 + 1)));

  ValueIterationResult result{GridValueFunction(grid, current, meta), 0, 0.0, 0.0};
  double residual = std::numeric_limits<double>::infinity();
  double min_increment = 0.0;
  int sweep = 0;
  while (sweep < config.max_sweeps) {
    if (workers == 1) {
      sweep_range(0, active.size());
    } else {
      std::vector<std::jthread> pool;
      const std::size_t chunk = (active.size() + workers - 1) / workers;
      for (unsigned w = 0; w < workers; ++w) {
        const std::size_t b = w * chunk;
        const std::size_t e = std::min(active.size(), b + chunk);
        if (b < e) pool.emplace_back(sweep_range, b, e);
      }
    }
    ++sweep;
    residual = 0.0;
    double sweep_min = 0.0;
    for (double c : change) {
      residual = std::max(residual, std::abs(c));
      sweep_min = std::min(sweep_min, c);
    }
    min_increment = std::min(min_increment, sweep_min);
    current.swap(next);
    if (config.on_sweep) config.on_sweep(sweep, residual, sweep_min);
    if (residual <= config.tol) break;
  }
  if (residual > config.tol) {
    std::ostringstream os;
    os << "value iteration did not converge in " << sweep
       << " sweeps (residual " << residual << ")";
    throw NumericalError(os.str(), residual);
  }
  result.value = GridValueFunction(grid, std::move(current), meta);
  result.sweeps = sweep;
  result.residual = residual;
  result.min_increment = min_increment;
  return result;
}

// ------------------------------------------------------------ serialization

namespace {

constexpr const char* kMagic = "clfstack-grid";
constexpr int kVersion = 1;

void write_vec(std::ostream& os, const char* key, const Vector& v) {
  os << key;
  for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << v[i];
  os << '\n';
}

void expect_key(std::istream& is, const std::string& key) {
  std::string got;
  if (!(is >> got) || got != key) {
    throw ValidationError("grid artifact: expected '" + key + "', found '" + got + "'");
  }
}

template <typename T>
T read_value(std::istream& is, const std::string& what) {
  T v{};
  if (!(is >> v)) throw ValidationError("grid artifact: cannot read " + what);
  return v;
}

Vector read_vec(std::istream& is, const std::string& key, int n) {
  expect_key(is, key);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = read_value<double>(is, key);
  return v;
}

}  // namespace

void write_grid(std::ostream& os, const GridValueFunction& gvf) {
  const GridSpec& g = gvf.grid();
  const GridMetadata& m = gvf.metadata();
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << kMagic << ' ' << kVersion << '\n';
  os << "dims " << g.dims() << '\n';
  write_vec(os, "lower", g.lower);
  write_vec(os, "upper", g.upper);
  os << "resolution";
  for (int r : g.resolution) os << ' ' << r;
  os << '\n';
  os << "termination_radius " << m.termination_radius << '\n';
  write_vec(os, "goal", m.goal);
  os << "dt " << m.dt << '\n';
  os << "state_weight " << m.state_weight << '\n';
  os << "input_weight " << m.input_weight << '\n';
  const int action_dim = m.actions.empty() ? 0 : static_cast<int>(m.actions.front().size());
  os << "actions " << m.actions.size() << ' ' << action_dim << '\n';
  for (const Vector& a : m.actions) {
    for (Eigen::Index i = 0; i < a.size(); ++i) os << (i ? " " : "") << a[i];
    os << '\n';
  }
  os << "values " << gvf.values().size() << '\n';
  for (double v : gvf.values()) os << v << '\n';
}

GridValueFunction read_grid(std::istream& is) {
  std::string magic;
  is >> magic;
  if (magic != kMagic) throw ValidationError("not a clfstack grid artifact");
  const int version = read_value<int>(is, "version");
  if (version != kVersion) {
    throw ValidationError("unsupported grid artifact version " + std::to_string(version));
  }
  expect_key(is, "dims");
  const int dims = read_value<int>(is, "dims");
  if (dims < 1 || dims > 16) throw ValidationError("grid artifact: bad dims");
  GridSpec grid;
  grid.lower = read_vec(is, "lower", dims);
  grid.upper = read_vec(is, "upper", dims);
  expect_key(is, "resolution");
  grid.resolution.resize(dims);
  for (int& r : grid.resolution) r = read_value<int>(is, "resolution");
  GridMetadata meta;
  expect_key(is, "termination_radius");
  meta.termination_radius = read_value<double>(is, "termination_radius");
  meta.goal = read_vec(is, "goal", dims);
  expect_key(is, "dt");
  meta.dt = read_value<double>(is, "dt");
  expect_key(is, "state_weight");
  meta.state_weight = read_value<double>(is, "state_weight");
  expect_key(is, "input_weight");
  meta.input_weight = read_value<double>(is, "input_weight");
  expect_key(is, "actions");
  const long n_actions = read_value<long>(is, "action count");
  const int action_dim = read_value<int>(is, "action dimension");
  for (long i = 0; i < n_actions; ++i) {
    Vector a(action_dim);
    for (int k = 0; k < action_dim; ++k) a[k] = read_value<double>(is, "action");
    meta.actions.push_back(std::move(a));
  }
  expect_key(is, "values");
  const long count = read_value<long>(is, "value count");
  std::vector<double> values(count);
  for (double& v : values) v = read_value<double>(is, "value");
  try {
    return GridValueFunction(std::move(grid), std::move(values), std::move(meta));
  } catch (const ContractViolation& e) {
    throw ValidationError(std::string("grid artifact: ") + e.what());
  }
}

void save_grid(const std::string& path, const GridValueFunction& gvf) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open '" + path + "' for writing");
  write_grid(os, gvf);
  if (!os) throw ValidationError("failed writing grid artifact '" + path + "'");
}

GridValueFunction load_grid(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open grid artifact '" + path + "'");
  return read_grid(is);
}

// ------------------------------------------------------------ grid provider

GridProvider::GridProvider(GridValueFunction gvf) : gvf_(std::move(gvf)) {
  require(gvf_.metadata().input_weight > 0.0,
          "grid provider needs a positive input weight");
  scale_ = 1.0 / gvf_.metadata().input_weight;
}

double GridProvider::value(const Vector& x) const {
  return scale_ * grid_eval(gvf_, x).value;
}

Vector GridProvider::gradient(const Vector& x) const {
  return scale_ * grid_gradient(gvf_, x).gradient;
}

double GridProvider::stage_cost(const Vector& x) const {
  const GridMetadata& m = gvf_.metadata();
  return scale_ * m.state_weight * (x - m.goal).squaredNorm();
}

std::string GridProvider::goal_descriptor() const {
  std::ostringstream os;
  os << "ball(r=" << gvf_.metadata().termination_radius << ")";
  return os.str();
}

}  // namespace clfstack
