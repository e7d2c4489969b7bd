#pragma once
// Minimal SVG output for the evaluation figures. No layout engine: each
// chart maps its data onto a fixed canvas with linear axes.

#include "casemix/evaluate.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace casemix::svg {

std::string escape(std::string_view text);

class Document {
 public:
  Document(double width, double height);

  void rect(double x, double y, double w, double h, std::string_view fill, std::string_view stroke = "none");
  void line(double x1, double y1, double x2, double y2, std::string_view stroke = "#000", double width = 1.0);
  void circle(double cx, double cy, double r, std::string_view fill);
  void text(double x, double y, std::string_view content, double size = 12, std::string_view anchor = "start");

  std::string str() const;

 private:
  double width_, height_;
  std::vector<std::string> elements_;
};

struct BarSeries {
  std::string name;
  std::vector<double> values;  // one per category
  std::string colour;
};

/// Grouped bars, one group per category.
std::string bar_chart(std::string_view title, const std::vector<std::string>& categories,
                      const std::vector<BarSeries>& series);

/// Side-by-side boxes per group label for two groupings of the same values.
std::string boxplot_chart(std::string_view title, const evaluate::BoxplotReport& learned,
                          const evaluate::BoxplotReport& rules);

/// Scatter of (x, y) points, e.g. final class against mean factor rank.
std::string scatter_chart(std::string_view title, std::string_view x_label, std::string_view y_label,
                          const std::vector<std::pair<double, double>>& points);

}  // namespace casemix::svg
