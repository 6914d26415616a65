#pragma once

#include "clfstack/sim.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace clfstack {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct PlotMarker {
  double x = 0.0;
  double y = 0.0;
  std::string label;
  std::string color = "#d62728";
};

struct PlotSegment {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

/// A static x-y chart rendered to a self-contained SVG file.
struct Chart {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<PlotSeries> series;
  /// Vertical dashed lines, e.g. schedule switches.
  std::vector<double> vlines;
  std::vector<PlotMarker> markers;
  /// Thin gray segments (formation edges).
  std::vector<PlotSegment> segments;
  /// Same scale on both axes (trajectory plots).
  bool equal_aspect = false;
};

void write_svg(std::ostream& os, const Chart& chart);
void save_svg(const std::string& path, const Chart& chart);

/// J_1..J_M against time with the schedule switches marked.
Chart value_chart(const SimulationTrace& trace, const std::vector<double>& switches);
/// x_1..x_n against time.
Chart state_chart(const SimulationTrace& trace);
/// Planar paths of `robot_count` robots stacked robot-major, start and end
/// marked; `edges` (robot index pairs) are drawn at the final state.
Chart trajectory_chart(const SimulationTrace& trace, int robot_count,
                       const std::vector<PlotMarker>& goals,
                       const std::vector<std::pair<int, int>>& edges);

}  // namespace clfstack
