#include "clfstack/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace clfstack {
namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b",
                          "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#d62728"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Round step of 1, 2 or 5 times a power of ten giving about `target` ticks.
double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double f : {1.0, 2.0, 5.0, 10.0}) {
    if (f * mag >= raw) return f * mag;
  }
  return 10.0 * mag;
}

std::string fmt(double v) {
  std::ostringstream os;
  if (std::abs(v) < 1e-12) v = 0.0;
  os << std::setprecision(4) << v;
  return os.str();
}

}  // namespace

void write_svg(std::ostream& os, const Chart& chart) {
  const double width = 900, height = 520;
  const double left = 80, right = 170, top = 50, bottom = 60;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  auto grow = [&](double x, double y) {
    if (!std::isfinite(x) || !std::isfinite(y)) return;
    xmin = std::min(xmin, x), xmax = std::max(xmax, x);
    ymin = std::min(ymin, y), ymax = std::max(ymax, y);
  };
  for (const PlotSeries& s : chart.series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) grow(s.x[i], s.y[i]);
  }
  for (const PlotMarker& m : chart.markers) grow(m.x, m.y);
  for (const PlotSegment& s : chart.segments) grow(s.x0, s.y0), grow(s.x1, s.y1);
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax - xmin < 1e-12) xmin -= 0.5, xmax += 0.5;
  if (ymax - ymin < 1e-12) ymin -= 0.5, ymax += 0.5;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad, ymax += ypad;
  double pw = width - left - right, ph = height - top - bottom;
  if (chart.equal_aspect) {
    const double xpad = 0.05 * (xmax - xmin);
    xmin -= xpad, xmax += xpad;
    const double scale = std::min(pw / (xmax - xmin), ph / (ymax - ymin));
    const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
    xmin = cx - 0.5 * pw / scale, xmax = cx + 0.5 * pw / scale;
    ymin = cy - 0.5 * ph / scale, ymax = cy + 0.5 * ph / scale;
  }
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
     << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"28\" text-anchor=\"middle\" font-size=\"18\">"
     << escape(chart.title) << "</text>\n";

  // Axes, ticks and grid.
  os << "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
  const double xs = nice_step(xmax - xmin, 8), ys = nice_step(ymax - ymin, 6);
  std::ostringstream labels;
  for (double x = std::ceil(xmin / xs) * xs; x <= xmax + 1e-9 * xs; x += xs) {
    os << "<line x1=\"" << sx(x) << "\" y1=\"" << top << "\" x2=\"" << sx(x) << "\" y2=\""
       << top + ph << "\"/>\n";
    labels << "<text x=\"" << sx(x) << "\" y=\"" << top + ph + 18
           << "\" text-anchor=\"middle\" font-size=\"12\">" << fmt(x) << "</text>\n";
  }
  for (double y = std::ceil(ymin / ys) * ys; y <= ymax + 1e-9 * ys; y += ys) {
    os << "<line x1=\"" << left << "\" y1=\"" << sy(y) << "\" x2=\"" << left + pw << "\" y2=\""
       << sy(y) << "\"/>\n";
    labels << "<text x=\"" << left - 8 << "\" y=\"" << sy(y) + 4
           << "\" text-anchor=\"end\" font-size=\"12\">" << fmt(y) << "</text>\n";
  }
  os << "</g>\n" << labels.str();
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 15
     << "\" text-anchor=\"middle\" font-size=\"14\">" << escape(chart.xlabel) << "</text>\n";
  os << "<text x=\"20\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" font-size=\"14\" "
     << "transform=\"rotate(-90 20 " << top + ph / 2 << ")\">" << escape(chart.ylabel)
     << "</text>\n";

  for (double v : chart.vlines) {
    if (v < xmin || v > xmax) continue;
    os << "<line x1=\"" << sx(v) << "\" y1=\"" << top << "\" x2=\"" << sx(v) << "\" y2=\""
       << top + ph << "\" stroke=\"black\" stroke-dasharray=\"6,4\"/>\n";
  }
  for (const PlotSegment& s : chart.segments) {
    os << "<line x1=\"" << sx(s.x0) << "\" y1=\"" << sy(s.y0) << "\" x2=\"" << sx(s.x1)
       << "\" y2=\"" << sy(s.y1) << "\" stroke=\"#4a90d9\" stroke-width=\"1.5\"/>\n";
  }
  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const PlotSeries& s = chart.series[k];
    const char* color = kPalette[k % (sizeof(kPalette) / sizeof(kPalette[0]))];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\"";
    if (s.dashed) os << " stroke-dasharray=\"5,3\"";
    os << " points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      os << sx(s.x[i]) << ',' << sy(s.y[i]) << ' ';
    }
    os << "\"/>\n";
    const double ly = top + 10 + 20 * static_cast<double>(k);
    os << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 40
       << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"";
    if (s.dashed) os << " stroke-dasharray=\"5,3\"";
    os << "/>\n<text x=\"" << left + pw + 46 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">"
       << escape(s.label) << "</text>\n";
  }
  for (const PlotMarker& m : chart.markers) {
    os << "<circle cx=\"" << sx(m.x) << "\" cy=\"" << sy(m.y) << "\" r=\"5\" fill=\"" << m.color
       << "\"/>\n";
    if (!m.label.empty()) {
      os << "<text x=\"" << sx(m.x) + 7 << "\" y=\"" << sy(m.y) - 7 << "\" font-size=\"12\">"
         << escape(m.label) << "</text>\n";
    }
  }
  os << "</svg>\n";
}

void save_svg(const std::string& path, const Chart& chart) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open '" + path + "' for writing");
  write_svg(os, chart);
}

Chart value_chart(const SimulationTrace& trace, const std::vector<double>& switches) {
  Chart c;
  c.title = "Task value functions";
  c.xlabel = "t [s]";
  c.ylabel = "J";
  c.vlines = switches;
  const std::vector<double> t = trace.times();
  for (std::size_t i = 0; i < trace.task_ids.size(); ++i) {
    c.series.push_back({"J " + trace.task_ids[i], t, trace.series(static_cast<int>(i))});
  }
  return c;
}

Chart state_chart(const SimulationTrace& trace) {
  Chart c;
  c.title = "State";
  c.xlabel = "t [s]";
  c.ylabel = "x";
  const std::vector<double> t = trace.times();
  for (int i = 0; i < trace.state_dim; ++i) {
    PlotSeries s{"x" + std::to_string(i + 1), t, {}};
    for (const StepRecord& r : trace.records) s.y.push_back(r.x[i]);
    c.series.push_back(std::move(s));
  }
  return c;
}

Chart trajectory_chart(const SimulationTrace& trace, int robot_count,
                       const std::vector<PlotMarker>& goals,
                       const std::vector<std::pair<int, int>>& edges) {
  Chart c;
  c.title = "Robot trajectories";
  c.xlabel = "x [m]";
  c.ylabel = "y [m]";
  c.equal_aspect = true;
  c.markers = goals;
  const int d = robot_count > 0 ? trace.state_dim / robot_count : 0;
  if (d < 2 || trace.records.empty()) return c;
  for (int r = 0; r < robot_count; ++r) {
    PlotSeries s{"robot " + std::to_string(r + 1), {}, {}};
    for (const StepRecord& rec : trace.records) {
      s.x.push_back(rec.x[r * d]);
      s.y.push_back(rec.x[r * d + 1]);
    }
    c.markers.push_back({s.x.front(), s.y.front(), "", "#aaaaaa"});
    c.markers.push_back({s.x.back(), s.y.back(), "", "#333333"});
    c.series.push_back(std::move(s));
  }
  const Vector& xf = trace.records.back().x;
  for (const auto& [i, j] : edges) {
    c.segments.push_back({xf[i * d], xf[i * d + 1], xf[j * d], xf[j * d + 1]});
  }
  return c;
}

}  // namespace clfstack
