#ifndef BRVR_SVG_PLOT_HPP
#define BRVR_SVG_PLOT_HPP

#include <string>
#include <utility>
#include <vector>

namespace brvr {

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  ///< (x, y); y > 0 for log scale
};

/// Self-contained SVG line chart with a log10 y axis. Non-positive or
/// non-finite y values are dropped.
std::string render_log_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                            const std::vector<PlotSeries>& series);

}  // namespace brvr

#endif  // BRVR_SVG_PLOT_HPP
