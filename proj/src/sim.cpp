#include "clfstack/sim.hpp"

#include "clfstack/log.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

namespace clfstack {

std::vector<std::string> Scenario::task_ids() const {
  std::vector<std::string> ids;
  for (const TaskSpec& t : tasks) ids.push_back(t.id);
  return ids;
}

void Scenario::validate() const {
  if (!(horizon > 0.0)) throw ValidationError("horizon must be positive");
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  const double steps = horizon / dt;
  if (std::abs(steps - std::round(steps)) > 1e-6 * std::max(1.0, steps)) {
    throw ValidationError("horizon must be an integer multiple of dt");
  }
  if (x0.size() != system.state_dim()) {
    throw ValidationError("initial state has " + std::to_string(x0.size()) +
                          " entries, system state dimension is " +
                          std::to_string(system.state_dim()));
  }
  if (tasks.empty()) throw ValidationError("scenario has no tasks");
  std::set<std::string> seen;
  for (const TaskSpec& t : tasks) {
    if (!seen.insert(t.id).second) throw ValidationError("duplicate task id '" + t.id + "'");
    ensemble_provider(t, system.state_dim());
  }
  schedule.validate(horizon);
  for (const ScheduleSegment& seg : schedule.segments) build_K(seg.relations, task_ids());
  if (!(controller.kappa > 0.0)) throw ValidationError("kappa must be positive");
}

std::vector<double> SimulationTrace::series(int task) const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const StepRecord& r : records) out.push_back(r.values[task]);
  return out;
}

std::vector<double> SimulationTrace::times() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const StepRecord& r : records) out.push_back(r.t);
  return out;
}

SimulationTrace run(const Scenario& scenario) {
  scenario.validate();
  const std::vector<std::string> ids = scenario.task_ids();
  const int n_tasks = static_cast<int>(ids.size());
  const int m = scenario.system.input_dim();
  const long steps = std::lround(scenario.horizon / scenario.dt);

  SimulationTrace trace;
  trace.task_ids = ids;
  trace.state_dim = scenario.system.state_dim();
  trace.input_dim = m;
  trace.records.reserve(steps + 1);

  std::vector<PrioritizationMatrix> k_per_segment;
  for (const ScheduleSegment& seg : scenario.schedule.segments) {
    k_per_segment.push_back(build_K(seg.relations, ids));
  }

  Vector x = scenario.x0;
  std::vector<int> warm;
  std::vector<int> prev_rows;
  int prev_segment = -1;
  bool warned_all_dropped = false;
  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * scenario.dt;
    const int segment = scenario.schedule.segment_at(t);
    if (segment < 0) {
      trace.failed = true;
      trace.failure = "no schedule segment at t = " + std::to_string(t);
      return trace;
    }
    const PrioritizationMatrix& kmat = k_per_segment[segment];
    const AssembledQP qp = assemble_qp(scenario.tasks, scenario.system, x, kmat,
                                       scenario.controller.kappa,
                                       scenario.controller.margin);
    const bool reuse = scenario.controller.warm_start && segment == prev_segment &&
                       qp.task_row == prev_rows;
    const auto t0 = std::chrono::steady_clock::now();
    const QPSolution sol =
        solve_qp(qp.problem, scenario.controller.qp,
                 reuse ? std::span<const int>(warm) : std::span<const int>());
    const auto t1 = std::chrono::steady_clock::now();

    StepRecord rec;
    rec.t = t;
    rec.x = x;
    rec.u = sol.z.head(m);
    rec.values = qp.values;
    rec.delta = sol.z.tail(n_tasks);
    rec.residual = qp.task_residuals(sol.z);
    rec.active.assign(n_tasks + kmat.rows(), false);
    for (int i = 0; i < n_tasks; ++i) {
      const int row = qp.task_row[i];
      if (row >= 0) {
        rec.active[i] = std::find(sol.active.begin(), sol.active.end(), row) != sol.active.end();
      }
    }
    for (int r = 0; r < kmat.rows(); ++r) {
      const int row = qp.priority_row_offset + r;
      rec.active[n_tasks + r] =
          std::find(sol.active.begin(), sol.active.end(), row) != sol.active.end();
    }
    rec.dropped = qp.singular;
    const bool all_dropped = std::all_of(qp.singular.begin(), qp.singular.end(), [](bool b) { return b; });
    if (all_dropped && !warned_all_dropped) {
      log::warning("every task has a singular gradient at t = " + std::to_string(t) +
                   "; holding u = 0 while this lasts");
      warned_all_dropped = true;
    }
    rec.status = sol.status;
    rec.iterations = sol.iterations;
    rec.solve_time_s = std::chrono::duration<double>(t1 - t0).count();
    rec.segment = segment;
    trace.records.push_back(std::move(rec));

    if (sol.status != QPStatus::optimal) {
      trace.failed = true;
      trace.failure = std::string("QP ") + to_string(sol.status) + " at step " +
                      std::to_string(k) + " (t = " + std::to_string(t) + ")";
      return trace;
    }
    warm = sol.active;
    prev_rows = qp.task_row;
    prev_segment = segment;
    if (k == steps) break;

    x = step_rk4(scenario.system, x, trace.records.back().u, scenario.dt);
    if (!x.allFinite()) {
      trace.failed = true;
      trace.failure = "non-finite state after step " + std::to_string(k);
      return trace;
    }
  }
  return trace;
}

// ------------------------------------------------------------------ CSV

void write_trace_csv(std::ostream& os, const SimulationTrace& trace) {
  const int n_tasks = static_cast<int>(trace.task_ids.size());
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "t";
  for (int i = 1; i <= trace.state_dim; ++i) os << ",x_" << i;
  for (int i = 1; i <= trace.input_dim; ++i) os << ",u_" << i;
  for (int i = 1; i <= n_tasks; ++i) os << ",J_" << i;
  for (int i = 1; i <= n_tasks; ++i) os << ",delta_" << i;
  for (int i = 1; i <= n_tasks; ++i) os << ",residual_" << i;
  os << ",status,iters,solve_time_s\n";
  for (const StepRecord& r : trace.records) {
    os << r.t;
    for (Eigen::Index i = 0; i < r.x.size(); ++i) os << ',' << r.x[i];
    for (Eigen::Index i = 0; i < r.u.size(); ++i) os << ',' << r.u[i];
    for (Eigen::Index i = 0; i < r.values.size(); ++i) os << ',' << r.values[i];
    for (Eigen::Index i = 0; i < r.delta.size(); ++i) os << ',' << r.delta[i];
    for (Eigen::Index i = 0; i < r.residual.size(); ++i) os << ',' << r.residual[i];
    os << ',' << to_string(r.status) << ',' << r.iterations << ',' << r.solve_time_s << '\n';
  }
}

void save_trace_csv(const std::string& path, const SimulationTrace& trace) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open '" + path + "' for writing");
  write_trace_csv(os, trace);
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

QPStatus parse_status(const std::string& s) {
  if (s == "optimal") return QPStatus::optimal;
  if (s == "infeasible") return QPStatus::infeasible;
  if (s == "max_iter") return QPStatus::max_iter;
  throw ValidationError("trace: unknown status '" + s + "'");
}

int count_prefix(const std::vector<std::string>& header, const std::string& prefix) {
  int n = 0;
  for (const std::string& h : header) {
    if (h.rfind(prefix, 0) == 0) ++n;
  }
  return n;
}

// strtod rather than stod: subnormal values (a decayed task value, say) set
// ERANGE, which stod reports as an error.
double parse_number(const std::string& cell, std::size_t row) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || (errno == ERANGE && std::abs(v) > 1.0)) {
    throw ValidationError("trace: bad number '" + cell + "' in row " + std::to_string(row));
  }
  return v;
}

}  // namespace

SimulationTrace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("trace: empty file");
  const std::vector<std::string> header = split(line);
  if (header.empty() || header.front() != "t") throw ValidationError("trace: bad header");
  SimulationTrace trace;
  trace.state_dim = count_prefix(header, "x_");
  trace.input_dim = count_prefix(header, "u_");
  const int n_tasks = count_prefix(header, "J_");
  const std::size_t expected = 1 + trace.state_dim + trace.input_dim + 3 * n_tasks + 3;
  if (header.size() != expected) throw ValidationError("trace: unexpected column layout");
  for (int i = 1; i <= n_tasks; ++i) trace.task_ids.push_back("T" + std::to_string(i));
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != expected) throw ValidationError("trace: ragged row");
    std::size_t c = 0;
    const std::size_t row = trace.records.size() + 1;
    auto next = [&]() { return parse_number(cells[c++], row); };
    auto vec = [&](int len) {
      Vector v(len);
      for (int i = 0; i < len; ++i) v[i] = next();
      return v;
    };
    StepRecord r;
    r.t = next();
    r.x = vec(trace.state_dim);
    r.u = vec(trace.input_dim);
    r.values = vec(n_tasks);
    r.delta = vec(n_tasks);
    r.residual = vec(n_tasks);
    r.status = parse_status(cells[c++]);
    r.iterations = static_cast<int>(next());
    r.solve_time_s = next();
    trace.records.push_back(std::move(r));
  }
  return trace;
}

SimulationTrace load_trace_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open trace '" + path + "'");
  return read_trace_csv(is);
}

// -------------------------------------------------------------- analysis

NullspaceReport check_nullspace_convergence(const SimulationTrace& trace,
                                            const PrioritizationMatrix& k,
                                            double tol, double t_begin,
                                            double t_end) {
  NullspaceReport rep;
  for (const StepRecord& r : trace.records) {
    if (r.t < t_begin - 1e-12 || r.t > t_end + 1e-12) continue;
    rep.times.push_back(r.t);
    rep.norms.push_back(k.rows() == 0 ? 0.0 : (k.k * r.values).norm());
  }
  if (rep.norms.empty()) {
    rep.converged = true;
    return rep;
  }
  rep.initial = rep.norms.front();
  rep.final_value = rep.norms.back();
  rep.ratio = rep.initial > 0.0 ? rep.final_value / rep.initial : 0.0;
  rep.converged = rep.final_value <= tol * (1.0 + rep.initial);
  return rep;
}

bool PhaseReport::all_passed() const {
  return std::all_of(results.begin(), results.end(),
                     [](const ExpectationResult& r) { return r.passed; });
}

PhaseReport phase_report(const SimulationTrace& trace,
                         const PrioritySchedule& schedule,
                         const std::vector<PhaseExpectation>& expectations) {
  PhaseReport rep;
  const int n_tasks = static_cast<int>(trace.task_ids.size());
  const int n_seg = static_cast<int>(schedule.segments.size());
  // Records of segment s: [first[s], last[s]]; the last record of a segment
  // is its end point (the next segment's first time for half-open segments).
  std::vector<std::size_t> first(n_seg, 0), last(n_seg, 0);
  std::vector<bool> seen(n_seg, false);
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const int s = schedule.segment_at(trace.records[i].t);
    if (s < 0) continue;
    if (!seen[s]) first[s] = i, seen[s] = true;
    last[s] = i;
  }
  for (int s = 0; s < n_seg; ++s) {
    if (seen[s] && s + 1 < n_seg && last[s] + 1 < trace.records.size()) ++last[s];
  }
  rep.stats.assign(n_seg, std::vector<TaskPhaseStats>(n_tasks));
  for (int s = 0; s < n_seg; ++s) {
    if (!seen[s]) continue;
    for (int i = 0; i < n_tasks; ++i) {
      TaskPhaseStats& st = rep.stats[s][i];
      st.start = trace.records[first[s]].values[i];
      st.end = trace.records[last[s]].values[i];
      st.min = st.max = st.start;
      std::size_t nonincreasing = 0;
      for (std::size_t k = first[s]; k <= last[s]; ++k) {
        const double v = trace.records[k].values[i];
        st.min = std::min(st.min, v);
        st.max = std::max(st.max, v);
        if (k > first[s] && v <= trace.records[k - 1].values[i]) ++nonincreasing;
      }
      const std::size_t transitions = last[s] - first[s];
      st.nonincreasing_fraction =
          transitions ? static_cast<double>(nonincreasing) / transitions : 1.0;
    }
  }

  for (const PhaseExpectation& e : expectations) {
    ExpectationResult r;
    r.expectation = e;
    if (e.segment < 0 || e.segment >= n_seg || !seen[e.segment] || e.task < 0 ||
        e.task >= n_tasks) {
      r.description = "expectation refers to a missing segment or task";
      rep.results.push_back(r);
      continue;
    }
    const TaskPhaseStats& st = rep.stats[e.segment][e.task];
    double reference = st.start;
    if (e.reference == PhaseExpectation::Reference::running_peak) {
      for (std::size_t k = 0; k <= first[e.segment]; ++k) {
        reference = std::max(reference, trace.records[k].values[e.task]);
      }
    }
    const double threshold = e.fraction * reference;
    std::ostringstream desc;
    desc << "segment " << e.segment + 1 << " " << trace.task_ids[e.task] << ": ";
    switch (e.kind) {
      case PhaseExpectation::Kind::driven_to_zero:
        r.value = st.end;
        r.limit = threshold;
        r.passed = st.end <= threshold;
        desc << "end value <= " << e.fraction * 100 << "% of "
             << (e.reference == PhaseExpectation::Reference::segment_start
                     ? "segment-start value"
                     : "running peak");
        break;
      case PhaseExpectation::Kind::increases:
        r.value = st.end;
        r.limit = st.start;
        r.passed = st.end > st.start;
        desc << "end value > start value";
        break;
      case PhaseExpectation::Kind::bounded_away: {
        const double t_end = trace.records[last[e.segment]].t;
        double min_tail = std::numeric_limits<double>::infinity();
        for (std::size_t k = first[e.segment]; k <= last[e.segment]; ++k) {
          if (trace.records[k].t >= t_end - e.window - 1e-12) {
            min_tail = std::min(min_tail, trace.records[k].values[e.task]);
          }
        }
        r.value = min_tail;
        r.limit = e.factor * threshold;
        r.passed = min_tail > r.limit;
        desc << "min over last " << e.window << " s > " << e.factor << "x threshold";
        break;
      }
    }
    r.description = desc.str();
    rep.results.push_back(r);
  }
  return rep;
}

std::vector<PhaseExpectation> three_phase_expectations() {
  using K = PhaseExpectation::Kind;
  using R = PhaseExpectation::Reference;
  std::vector<PhaseExpectation> e;
  for (int task : {1, 2, 3}) e.push_back({0, task, K::driven_to_zero, R::segment_start});
  e.push_back({0, 0, K::increases});
  e.push_back({1, 0, K::driven_to_zero, R::segment_start});
  for (int task : {0, 1}) e.push_back({2, task, K::driven_to_zero, R::running_peak});
  for (int task : {2, 3}) e.push_back({2, task, K::bounded_away, R::segment_start});
  return e;
}

void write_phase_report(std::ostream& os, const PhaseReport& report,
                        const SimulationTrace& trace) {
  os << std::setprecision(6);
  for (std::size_t s = 0; s < report.stats.size(); ++s) {
    os << "segment " << s + 1 << '\n';
    for (std::size_t i = 0; i < report.stats[s].size(); ++i) {
      const TaskPhaseStats& st = report.stats[s][i];
      os << "  " << trace.task_ids[i] << ": start " << st.start << "  end " << st.end
         << "  min " << st.min << "  max " << st.max << "  nonincreasing "
         << st.nonincreasing_fraction << '\n';
    }
  }
  for (const ExpectationResult& r : report.results) {
    os << (r.passed ? "[PASS] " : "[FAIL] ") << r.description << "  (value " << r.value
       << ", limit " << r.limit << ")\n";
  }
}

}  // namespace clfstack
