#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wcmdp {

struct PlotSeries {
  std::string name;
  std::vector<double> x;  // must be positive (log axis)
  std::vector<double> y;
};

/// Standalone SVG line chart with a log10 x axis, one polyline per series.
void write_svg_plot(std::ostream& out, const std::vector<PlotSeries>& series,
                    const std::string& title, const std::string& x_label,
                    const std::string& y_label);

}  // namespace wcmdp
