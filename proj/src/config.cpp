#include "clfstack/config.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace clfstack {
namespace {

using Json = nlohmann::ordered_json;

bool same(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

bool same(const Vector& a, const Vector& b) {
  return a.size() == b.size() && a == b;
}

/// A JSON object whose keys are consumed one by one; whatever is left over
/// when the section is closed is an unknown key.
class Section {
 public:
  Section(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_, "expected an object");
  }

  static std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
      std::size_t diag = row[0];
      row[0] = i;
      for (std::size_t j = 1; j <= b.size(); ++j) {
        const std::size_t up = row[j];
        row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] != b[j - 1])});
        diag = up;
      }
    }
    return row[b.size()];
  }

  [[noreturn]] static void fail(const std::string& key, const std::string& what) {
    throw ValidationError("config: '" + key + "': " + what);
  }

  std::string key(const std::string& name) const {
    return path_.empty() ? name : path_ + "." + name;
  }

  bool has(const std::string& name) const { return node_.contains(name); }

  const Json& raw(const std::string& name) {
    if (!node_.contains(name)) {
      for (auto it = node_.begin(); it != node_.end(); ++it) {
        if (edit_distance(it.key(), name) <= 2) {
          fail(key(name), "missing required key; '" + key(it.key()) + "' is not a known key");
        }
      }
      fail(key(name), "missing required key");
    }
    used_.insert(name);
    return node_.at(name);
  }

  double number(const std::string& name) {
    const Json& v = raw(name);
    if (!v.is_number()) fail(key(name), "expected a number");
    return v.get<double>();
  }
  double number(const std::string& name, double fallback) {
    return has(name) ? number(name) : fallback;
  }

  int integer(const std::string& name) {
    const Json& v = raw(name);
    if (!v.is_number_integer()) fail(key(name), "expected an integer");
    return v.get<int>();
  }
  int integer(const std::string& name, int fallback) {
    return has(name) ? integer(name) : fallback;
  }

  std::string string(const std::string& name) {
    const Json& v = raw(name);
    if (!v.is_string()) fail(key(name), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& name, const std::string& fallback) {
    return has(name) ? string(name) : fallback;
  }

  bool boolean(const std::string& name, bool fallback) {
    if (!has(name)) return fallback;
    const Json& v = raw(name);
    if (!v.is_boolean()) fail(key(name), "expected true or false");
    return v.get<bool>();
  }

  Vector vector(const std::string& name) {
    const Json& v = raw(name);
    return to_vector(v, key(name));
  }

  Matrix matrix(const std::string& name) {
    const Json& v = raw(name);
    if (!v.is_array() || v.empty()) fail(key(name), "expected a non-empty array of rows");
    const std::size_t cols = v.front().is_array() ? v.front().size() : 0;
    if (cols == 0) fail(key(name), "expected a non-empty array of rows");
    Matrix m(v.size(), cols);
    for (std::size_t r = 0; r < v.size(); ++r) {
      if (!v[r].is_array() || v[r].size() != cols) fail(key(name), "rows differ in length");
      for (std::size_t c = 0; c < cols; ++c) {
        if (!v[r][c].is_number()) fail(key(name), "expected numbers");
        m(r, c) = v[r][c].get<double>();
      }
    }
    return m;
  }

  std::vector<int> integers(const std::string& name) {
    const Json& v = raw(name);
    if (!v.is_array()) fail(key(name), "expected an array of integers");
    std::vector<int> out;
    for (const Json& e : v) {
      if (!e.is_number_integer()) fail(key(name), "expected an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }

  Section child(const std::string& name) { return Section(raw(name), key(name)); }

  /// Rejects keys that were never read.
  void close() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!used_.count(it.key())) fail(key(it.key()), "unknown key");
    }
  }

  static Vector to_vector(const Json& v, const std::string& where) {
    if (!v.is_array()) fail(where, "expected an array of numbers");
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(where, "expected an array of numbers");
      out[i] = v[i].get<double>();
    }
    return out;
  }

 private:
  const Json& node_;
  std::string path_;
  std::set<std::string> used_;
};

Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json to_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(row);
  }
  return a;
}

int state_dim_of(const SystemConfig& s) {
  if (s.type == "single_integrator") return s.robot_count * s.workspace_dim;
  if (s.type == "double_integrator") return 2;
  return static_cast<int>(s.a.rows());
}

SystemConfig parse_system(Section sec) {
  SystemConfig s;
  s.type = sec.string("type");
  if (s.type == "single_integrator") {
    s.robot_count = sec.integer("robot_count", 1);
    s.workspace_dim = sec.integer("workspace_dim", 2);
    if (s.robot_count < 1) Section::fail(sec.key("robot_count"), "must be >= 1");
    if (s.workspace_dim < 1) Section::fail(sec.key("workspace_dim"), "must be >= 1");
  } else if (s.type == "double_integrator") {
    s.robot_count = 1;
    s.workspace_dim = 1;
  } else if (s.type == "linear") {
    s.robot_count = 1;
    s.workspace_dim = 1;
    s.a = sec.matrix("A");
    s.b = sec.matrix("B");
    if (s.a.rows() != s.a.cols()) Section::fail(sec.key("A"), "must be square");
    if (s.b.rows() != s.a.rows()) Section::fail(sec.key("B"), "must have as many rows as A");
  } else {
    Section::fail(sec.key("type"),
                  "unknown system type '" + s.type +
                      "' (single_integrator, double_integrator, linear)");
  }
  sec.close();
  return s;
}

TaskConfig parse_task(Section sec, const SystemConfig& system) {
  TaskConfig t;
  t.id = sec.string("id");
  if (t.id.empty()) Section::fail(sec.key("id"), "must not be empty");
  t.type = sec.string("type");
  if (sec.has("robot_block")) {
    if (system.type != "single_integrator") {
      Section::fail(sec.key("robot_block"), "only valid for single_integrator systems");
    }
    t.robot_block = sec.integer("robot_block");
    if (*t.robot_block < 0 || *t.robot_block >= system.robot_count) {
      Section::fail(sec.key("robot_block"), "robot index out of range");
    }
  }
  const int n = state_dim_of(system);
  const int local = t.robot_block ? system.workspace_dim : n;
  if (t.type == "goto_goal") {
    Section p = sec.child("params");
    t.goal = p.vector("goal");
    t.c = p.number("c", 1.0);
    if (t.goal.size() != local) {
      Section::fail(p.key("goal"), "expected " + std::to_string(local) + " coordinates");
    }
    if (!(t.c > 0.0)) Section::fail(p.key("c"), "must be positive");
    p.close();
  } else if (t.type == "formation") {
    if (system.type != "single_integrator") {
      Section::fail(sec.key("type"), "formation tasks need a single_integrator system");
    }
    if (t.robot_block) Section::fail(sec.key("robot_block"), "formation tasks span all robots");
    Section p = sec.child("params");
    t.shape = p.string("shape", "hexagon");
    if (t.shape == "hexagon") {
      t.side = p.number("side", 1.0);
      if (!(t.side > 0.0)) Section::fail(p.key("side"), "must be positive");
      if (system.robot_count != 6 || system.workspace_dim != 2) {
        Section::fail(p.key("shape"), "hexagon needs 6 robots in the plane");
      }
    } else if (t.shape == "custom") {
      t.weights = p.matrix("weights");
      if (t.weights.rows() != system.robot_count) {
        Section::fail(p.key("weights"), "must be robot_count x robot_count");
      }
      try {
        FormationSpec{t.weights, system.workspace_dim}.validate();
      } catch (const ContractViolation& e) {
        Section::fail(p.key("weights"), e.what());
      }
    } else {
      Section::fail(p.key("shape"), "unknown shape '" + t.shape + "' (hexagon, custom)");
    }
    t.energy_weight = p.number("energy_weight", 0.01);
    t.cost_weight = p.number("cost_weight", 0.01);
    if (!(t.energy_weight > 0.0)) Section::fail(p.key("energy_weight"), "must be positive");
    if (!(t.cost_weight >= 0.0)) Section::fail(p.key("cost_weight"), "must be >= 0");
    p.close();
  } else if (t.type == "grid_value") {
    Section p = sec.child("params");
    t.path = p.string("path");
    p.close();
  } else if (t.type == "lqr") {
    if (system.type == "single_integrator") {
      Section::fail(sec.key("type"), "lqr tasks need a double_integrator or linear system");
    }
    Section p = sec.child("params");
    t.q = p.matrix("Q");
    if (t.q.rows() != n || t.q.cols() != n) {
      Section::fail(p.key("Q"), "must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    p.close();
  } else {
    Section::fail(sec.key("type"), "unknown task type '" + t.type +
                                       "' (goto_goal, formation, grid_value, lqr)");
  }
  sec.close();
  return t;
}

SegmentConfig parse_segment(Section sec, const std::set<std::string>& ids) {
  SegmentConfig s;
  s.t_start = sec.number("t_start");
  s.t_end = sec.number("t_end");
  s.l = sec.number("l", 0.05);
  if (!(s.l > 0.0 && s.l <= 0.5)) Section::fail(sec.key("l"), "must lie in (0, 0.5]");
  const Json& rel = sec.raw("relations");
  if (!rel.is_array()) Section::fail(sec.key("relations"), "expected an array");
  for (std::size_t i = 0; i < rel.size(); ++i) {
    Section r(rel[i], sec.key("relations") + "[" + std::to_string(i) + "]");
    RelationConfig rc{r.string("higher"), r.string("lower")};
    for (const std::string* id : {&rc.higher, &rc.lower}) {
      if (!ids.count(*id)) Section::fail(r.key(id == &rc.higher ? "higher" : "lower"),
                                         "undefined task id '" + *id + "'");
    }
    r.close();
    s.relations.push_back(rc);
  }
  sec.close();
  return s;
}

ControllerConfig parse_controller(Section sec) {
  ControllerConfig c;
  c.kappa = sec.number("kappa", c.kappa);
  c.eps_grad = sec.number("eps_grad", c.eps_grad);
  c.lambda_min = sec.number("lambda_min", c.lambda_min);
  c.lambda_max = sec.number("lambda_max", c.lambda_max);
  c.margin_mode = sec.string("margin_mode", c.margin_mode);
  c.alpha = sec.number("alpha", c.alpha);
  if (!(c.kappa > 0.0)) Section::fail(sec.key("kappa"), "must be positive");
  if (!(c.eps_grad > 0.0)) Section::fail(sec.key("eps_grad"), "must be positive");
  if (!(c.lambda_min > 0.0)) Section::fail(sec.key("lambda_min"), "must be positive");
  if (!(c.lambda_max >= c.lambda_min)) Section::fail(sec.key("lambda_max"), "must be >= lambda_min");
  if (c.margin_mode != "sigma" && c.margin_mode != "class_k") {
    Section::fail(sec.key("margin_mode"), "must be 'sigma' or 'class_k'");
  }
  if (!(c.alpha > 0.0)) Section::fail(sec.key("alpha"), "must be positive");
  sec.close();
  return c;
}

SimulationConfig parse_simulation(Section sec, int n) {
  SimulationConfig s;
  s.dt = sec.number("dt");
  s.horizon = sec.number("horizon");
  s.x0 = sec.vector("x0");
  if (!(s.dt > 0.0)) Section::fail(sec.key("dt"), "must be positive");
  if (!(s.horizon > 0.0)) Section::fail(sec.key("horizon"), "must be positive");
  if (s.x0.size() != n) {
    Section::fail(sec.key("x0"), "expected " + std::to_string(n) + " entries");
  }
  sec.close();
  return s;
}

LearningConfig parse_learning(Section sec, int n) {
  LearningConfig l;
  l.lower = sec.vector("lower");
  l.upper = sec.vector("upper");
  l.resolution = sec.integers("resolution");
  if (l.lower.size() != n || l.upper.size() != n ||
      static_cast<int>(l.resolution.size()) != n) {
    Section::fail(sec.key("resolution"), "lower, upper and resolution need " +
                                             std::to_string(n) + " entries");
  }
  for (int i = 0; i < n; ++i) {
    if (!(l.lower[i] < l.upper[i])) Section::fail(sec.key("upper"), "must exceed lower");
    if (l.resolution[i] < 2) Section::fail(sec.key("resolution"), "must be >= 2 per axis");
  }
  Section a = sec.child("actions");
  l.action_lower = a.number("lower");
  l.action_upper = a.number("upper");
  l.action_count = a.integer("count");
  if (!(l.action_lower <= l.action_upper)) Section::fail(a.key("upper"), "must be >= lower");
  if (l.action_count < 1) Section::fail(a.key("count"), "must be >= 1");
  a.close();
  l.dt = sec.number("dt", l.dt);
  l.tol = sec.number("tol", l.tol);
  l.max_sweeps = sec.integer("max_sweeps", l.max_sweeps);
  l.termination_radius = sec.number("termination_radius", l.termination_radius);
  l.goal = sec.has("goal") ? sec.vector("goal") : Vector::Zero(n);
  l.state_weight = sec.number("state_weight", l.state_weight);
  l.input_weight = sec.number("input_weight", l.input_weight);
  l.boundary_penalty = sec.number("boundary_penalty", l.boundary_penalty);
  if (!(l.dt > 0.0)) Section::fail(sec.key("dt"), "must be positive");
  if (!(l.tol > 0.0)) Section::fail(sec.key("tol"), "must be positive");
  if (l.max_sweeps < 1) Section::fail(sec.key("max_sweeps"), "must be >= 1");
  if (!(l.termination_radius >= 0.0)) Section::fail(sec.key("termination_radius"), "must be >= 0");
  if (l.goal.size() != n) Section::fail(sec.key("goal"), "expected " + std::to_string(n) + " entries");
  if (!(l.state_weight >= 0.0)) Section::fail(sec.key("state_weight"), "must be >= 0");
  if (!(l.input_weight > 0.0)) Section::fail(sec.key("input_weight"), "must be positive");
  if (!(l.boundary_penalty >= 0.0)) Section::fail(sec.key("boundary_penalty"), "must be >= 0");
  sec.close();
  return l;
}

OutputConfig parse_output(Section sec) {
  OutputConfig o;
  o.dir = sec.string("dir", o.dir);
  o.trace = sec.string("trace", o.trace);
  o.grid = sec.string("grid", o.grid);
  o.plot = sec.boolean("plot", o.plot);
  o.checks = sec.string("checks", o.checks);
  if (o.checks != "none" && o.checks != "three_phase" && o.checks != "nullspace") {
    Section::fail(sec.key("checks"), "must be 'none', 'three_phase' or 'nullspace'");
  }
  sec.close();
  return o;
}

PrioritySchedule to_schedule(const std::vector<SegmentConfig>& segments) {
  PrioritySchedule s;
  for (const SegmentConfig& seg : segments) {
    ScheduleSegment out{seg.t_start, seg.t_end, {}};
    for (const RelationConfig& r : seg.relations) out.relations.push_back({r.higher, r.lower, seg.l});
    s.segments.push_back(std::move(out));
  }
  return s;
}

std::pair<Matrix, Matrix> linear_matrices(const SystemConfig& s) {
  if (s.type == "double_integrator") {
    Matrix a(2, 2);
    a << 0, 1, 0, 0;
    Matrix b(2, 1);
    b << 0, 1;
    return {a, b};
  }
  return {s.a, s.b};
}

}  // namespace

bool SystemConfig::operator==(const SystemConfig& o) const {
  return type == o.type && robot_count == o.robot_count &&
         workspace_dim == o.workspace_dim && same(a, o.a) && same(b, o.b);
}

bool TaskConfig::operator==(const TaskConfig& o) const {
  return id == o.id && type == o.type && same(goal, o.goal) && c == o.c &&
         shape == o.shape && side == o.side && same(weights, o.weights) &&
         energy_weight == o.energy_weight && cost_weight == o.cost_weight &&
         path == o.path && same(q, o.q) && robot_block == o.robot_block;
}

bool SimulationConfig::operator==(const SimulationConfig& o) const {
  return dt == o.dt && horizon == o.horizon && same(x0, o.x0);
}

bool LearningConfig::operator==(const LearningConfig& o) const {
  return same(lower, o.lower) && same(upper, o.upper) && resolution == o.resolution &&
         action_lower == o.action_lower && action_upper == o.action_upper &&
         action_count == o.action_count && dt == o.dt && tol == o.tol &&
         max_sweeps == o.max_sweeps && termination_radius == o.termination_radius &&
         same(goal, o.goal) && state_weight == o.state_weight &&
         input_weight == o.input_weight && boundary_penalty == o.boundary_penalty;
}

bool ScenarioConfig::operator==(const ScenarioConfig& o) const {
  return name == o.name && description == o.description && system == o.system &&
         tasks == o.tasks && schedule == o.schedule && controller == o.controller &&
         simulation == o.simulation && learning == o.learning && output == o.output;
}

ScenarioConfig parse_config(const std::string& text, const std::string& base_dir) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("config: malformed JSON: ") + e.what());
  }
  Section root(doc, "");
  ScenarioConfig cfg;
  cfg.base_dir = base_dir;
  cfg.name = root.string("name");
  cfg.description = root.string("description", "");
  cfg.system = parse_system(root.child("system"));
  const int n = state_dim_of(cfg.system);

  const Json& tasks = root.raw("tasks");
  if (!tasks.is_array() || tasks.empty()) Section::fail("tasks", "expected a non-empty array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    TaskConfig t = parse_task(Section(tasks[i], "tasks[" + std::to_string(i) + "]"), cfg.system);
    if (!ids.insert(t.id).second) {
      Section::fail("tasks[" + std::to_string(i) + "].id", "duplicate task id '" + t.id + "'");
    }
    cfg.tasks.push_back(std::move(t));
  }

  Section sched = root.child("schedule");
  const Json& segs = sched.raw("segments");
  if (!segs.is_array() || segs.empty()) {
    Section::fail("schedule.segments", "expected a non-empty array");
  }
  for (std::size_t i = 0; i < segs.size(); ++i) {
    cfg.schedule.push_back(
        parse_segment(Section(segs[i], "schedule.segments[" + std::to_string(i) + "]"), ids));
  }
  sched.close();

  cfg.controller = root.has("controller") ? parse_controller(root.child("controller"))
                                          : ControllerConfig{};
  cfg.simulation = parse_simulation(root.child("simulation"), n);
  if (root.has("learning")) cfg.learning = parse_learning(root.child("learning"), n);
  cfg.output = root.has("output") ? parse_output(root.child("output")) : OutputConfig{};
  root.close();

  try {
    to_schedule(cfg.schedule).validate(cfg.simulation.horizon);
  } catch (const ValidationError& e) {
    Section::fail("schedule.segments", e.what());
  }
  if (cfg.output.checks == "three_phase" && (cfg.tasks.size() != 4 || cfg.schedule.size() != 3)) {
    Section::fail("output.checks", "three_phase needs 4 tasks and 3 schedule segments");
  }
  if (cfg.output.checks == "nullspace" && cfg.schedule.size() != 1) {
    Section::fail("output.checks", "nullspace needs a single schedule segment");
  }
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  std::filesystem::path dir = std::filesystem::path(path).parent_path();
  return parse_config(ss.str(), dir.empty() ? "." : dir.string());
}

std::string serialize_config(const ScenarioConfig& cfg) {
  Json doc;
  doc["name"] = cfg.name;
  doc["description"] = cfg.description;

  Json sys;
  sys["type"] = cfg.system.type;
  if (cfg.system.type == "single_integrator") {
    sys["robot_count"] = cfg.system.robot_count;
    sys["workspace_dim"] = cfg.system.workspace_dim;
  } else if (cfg.system.type == "linear") {
    sys["A"] = to_json(cfg.system.a);
    sys["B"] = to_json(cfg.system.b);
  }
  doc["system"] = sys;

  Json tasks = Json::array();
  for (const TaskConfig& t : cfg.tasks) {
    Json j;
    j["id"] = t.id;
    j["type"] = t.type;
    Json p;
    if (t.type == "goto_goal") {
      p["goal"] = to_json(t.goal);
      p["c"] = t.c;
    } else if (t.type == "formation") {
      p["shape"] = t.shape;
      if (t.shape == "hexagon") {
        p["side"] = t.side;
      } else {
        p["weights"] = to_json(t.weights);
      }
      p["energy_weight"] = t.energy_weight;
      p["cost_weight"] = t.cost_weight;
    } else if (t.type == "grid_value") {
      p["path"] = t.path;
    } else if (t.type == "lqr") {
      p["Q"] = to_json(t.q);
    }
    j["params"] = p;
    if (t.robot_block) j["robot_block"] = *t.robot_block;
    tasks.push_back(j);
  }
  doc["tasks"] = tasks;

  Json segs = Json::array();
  for (const SegmentConfig& s : cfg.schedule) {
    Json j;
    j["t_start"] = s.t_start;
    j["t_end"] = s.t_end;
    j["l"] = s.l;
    Json rel = Json::array();
    for (const RelationConfig& r : s.relations) rel.push_back({{"higher", r.higher}, {"lower", r.lower}});
    j["relations"] = rel;
    segs.push_back(j);
  }
  doc["schedule"]["segments"] = segs;

  const ControllerConfig& c = cfg.controller;
  doc["controller"] = {{"kappa", c.kappa},           {"eps_grad", c.eps_grad},
                       {"lambda_min", c.lambda_min}, {"lambda_max", c.lambda_max},
                       {"margin_mode", c.margin_mode}, {"alpha", c.alpha}};
  doc["simulation"] = {{"dt", cfg.simulation.dt},
                       {"horizon", cfg.simulation.horizon},
                       {"x0", to_json(cfg.simulation.x0)}};
  if (cfg.learning) {
    const LearningConfig& l = *cfg.learning;
    Json j;
    j["lower"] = to_json(l.lower);
    j["upper"] = to_json(l.upper);
    j["resolution"] = l.resolution;
    j["actions"] = {{"lower", l.action_lower}, {"upper", l.action_upper}, {"count", l.action_count}};
    j["dt"] = l.dt;
    j["tol"] = l.tol;
    j["max_sweeps"] = l.max_sweeps;
    j["termination_radius"] = l.termination_radius;
    j["goal"] = to_json(l.goal);
    j["state_weight"] = l.state_weight;
    j["input_weight"] = l.input_weight;
    j["boundary_penalty"] = l.boundary_penalty;
    doc["learning"] = j;
  }
  doc["output"] = {{"dir", cfg.output.dir},
                   {"trace", cfg.output.trace},
                   {"grid", cfg.output.grid},
                   {"plot", cfg.output.plot},
                   {"checks", cfg.output.checks}};
  return doc.dump(2) + "\n";
}

std::string resolve_path(const ScenarioConfig& config, const std::string& relative) {
  std::filesystem::path p(relative);
  if (p.is_absolute()) return p.string();
  return (std::filesystem::path(config.base_dir) / p).lexically_normal().string();
}

ControlAffineSystem build_system(const ScenarioConfig& config) {
  const SystemConfig& s = config.system;
  if (s.type == "single_integrator") return make_single_integrator(s.robot_count, s.workspace_dim);
  if (s.type == "double_integrator") return make_double_integrator();
  return make_linear_system(s.a, s.b);
}

Scenario build_scenario(const ScenarioConfig& config) {
  ControlAffineSystem system = build_system(config);
  ClfParams clf;
  clf.gradient_epsilon = config.controller.eps_grad;
  clf.lambda_min = config.controller.lambda_min;
  clf.lambda_max = config.controller.lambda_max;

  std::vector<TaskSpec> tasks;
  for (const TaskConfig& t : config.tasks) {
    TaskSpec spec;
    spec.id = t.id;
    spec.clf = clf;
    if (t.robot_block) spec.robot_block = RobotBlock{*t.robot_block, config.system.workspace_dim};
    if (t.type == "goto_goal") {
      spec.provider = goto_goal_provider(t.goal, t.c);
    } else if (t.type == "formation") {
      FormationSpec f = t.shape == "hexagon"
                            ? hexagon_formation(t.side)
                            : FormationSpec{t.weights, config.system.workspace_dim};
      spec.provider = formation_provider(f, t.energy_weight, t.cost_weight);
    } else if (t.type == "grid_value") {
      const std::string path = resolve_path(config, t.path);
      if (!std::filesystem::exists(path)) {
        throw ValidationError("task '" + t.id + "': grid artifact '" + path +
                              "' not found; create it with `clfstack learn`");
      }
      GridValueFunction gvf = load_grid(path);
      if (gvf.dims() != system.state_dim()) {
        throw ValidationError("task '" + t.id + "': grid artifact has dimension " +
                              std::to_string(gvf.dims()) + ", system state has " +
                              std::to_string(system.state_dim()));
      }
      spec.provider = std::make_shared<GridProvider>(std::move(gvf));
    } else {
      auto [a, b] = linear_matrices(config.system);
      const Matrix p = riccati_solve(a, b, t.q, Matrix::Identity(b.cols(), b.cols()));
      spec.provider = std::make_shared<QuadraticProvider>(p, t.q);
    }
    tasks.push_back(std::move(spec));
  }

  ControllerParams controller;
  controller.kappa = config.controller.kappa;
  controller.margin = config.controller.margin_mode == "class_k"
                          ? MarginMode::class_k(config.controller.alpha)
                          : MarginMode::sigma_margin();
  Scenario sc{std::move(system), std::move(tasks), to_schedule(config.schedule),
              config.simulation.horizon, config.simulation.dt, config.simulation.x0,
              controller};
  sc.validate();
  return sc;
}

LearningProblem build_learning(const ScenarioConfig& config) {
  if (!config.learning) throw ValidationError("config: 'learning' section is missing");
  const LearningConfig& l = *config.learning;
  ControlAffineSystem system = build_system(config);
  const int m = system.input_dim();

  ValueIterationConfig vi;
  vi.grid.lower = l.lower;
  vi.grid.upper = l.upper;
  vi.grid.resolution = l.resolution;
  vi.goal = l.goal;
  vi.termination_radius = l.termination_radius;
  vi.tol = l.tol;
  vi.max_sweeps = l.max_sweeps;
  vi.boundary_penalty = l.boundary_penalty;
  vi.state_weight = l.state_weight;
  vi.input_weight = l.input_weight;

  // Product of the per-input scalar sets.
  const std::vector<Vector> axis = scalar_action_set(l.action_lower, l.action_upper, l.action_count);
  std::vector<Vector> actions{Vector(0)};
  for (int k = 0; k < m; ++k) {
    std::vector<Vector> next;
    for (const Vector& prefix : actions) {
      for (const Vector& a : axis) {
        Vector v(prefix.size() + 1);
        v << prefix, a[0];
        next.push_back(v);
      }
    }
    actions = std::move(next);
  }
  vi.actions = std::move(actions);

  const Vector goal = l.goal;
  const double wx = l.state_weight;
  const double wu = l.input_weight;
  StageCostFn cost = [goal, wx, wu](const Vector& x, const Vector& u) {
    return wx * (x - goal).squaredNorm() + wu * u.squaredNorm();
  };
  return LearningProblem{discretize(system, l.dt), std::move(cost), std::move(vi)};
}

}  // namespace clfstack
