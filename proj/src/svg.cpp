#include "casemix/svg.hpp"

#include "casemix/csv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace casemix::svg {

namespace {

std::string num(double v) {
  // Two decimals keep files small and stable.
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << (std::abs(v) < 0.005 ? 0.0 : v);
  return os.str();
}

constexpr double kW = 720, kH = 420, kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;

struct Axis {
  double lo, hi;
  double map(double v, double a, double b) const { return hi > lo ? a + (v - lo) / (hi - lo) * (b - a) : (a + b) / 2; }
};

void frame(Document& d, std::string_view title, const Axis& y) {
  d.text(kW / 2, 24, title, 15, "middle");
  d.line(kLeft, kTop, kLeft, kH - kBottom);
  d.line(kLeft, kH - kBottom, kW - kRight, kH - kBottom);
  for (int t = 0; t <= 4; ++t) {
    const double v = y.lo + (y.hi - y.lo) * t / 4.0;
    const double py = y.map(v, kH - kBottom, kTop);
    d.line(kLeft - 4, py, kLeft, py);
    d.text(kLeft - 6, py + 4, csv::format_double(std::round(v * 100) / 100), 10, "end");
  }
}

}  // namespace

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

Document::Document(double width, double height) : width_(width), height_(height) {}

void Document::rect(double x, double y, double w, double h, std::string_view fill, std::string_view stroke) {
  elements_.push_back("<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(std::max(w, 0.0)) +
                      "\" height=\"" + num(std::max(h, 0.0)) + "\" fill=\"" + escape(fill) + "\" stroke=\"" +
                      escape(stroke) + "\"/>");
}

void Document::line(double x1, double y1, double x2, double y2, std::string_view stroke, double width) {
  elements_.push_back("<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
                      "\" stroke=\"" + escape(stroke) + "\" stroke-width=\"" + num(width) + "\"/>");
}

void Document::circle(double cx, double cy, double r, std::string_view fill) {
  elements_.push_back("<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) + "\" fill=\"" +
                      escape(fill) + "\" fill-opacity=\"0.4\"/>");
}

void Document::text(double x, double y, std::string_view content, double size, std::string_view anchor) {
  elements_.push_back("<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + num(size) +
                      "\" font-family=\"sans-serif\" text-anchor=\"" + escape(anchor) + "\">" + escape(content) +
                      "</text>");
}

std::string Document::str() const {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    num(width_) + "\" height=\"" + num(height_) + "\" viewBox=\"0 0 " + num(width_) + " " +
                    num(height_) + "\">\n";
  for (const auto& e : elements_) out += "  " + e + "\n";
  return out + "</svg>\n";
}

std::string bar_chart(std::string_view title, const std::vector<std::string>& categories,
                      const std::vector<BarSeries>& series) {
  Document d(kW, kH);
  double hi = 0;
  for (const auto& s : series) {
    for (double v : s.values) hi = std::max(hi, v);
  }
  const Axis y{0, hi > 0 ? hi * 1.1 : 1};
  frame(d, title, y);
  const double slot = (kW - kLeft - kRight) / std::max<std::size_t>(categories.size(), 1);
  const double bar = slot * 0.7 / std::max<std::size_t>(series.size(), 1);
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double x0 = kLeft + slot * c + slot * 0.15;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double v = c < series[s].values.size() ? series[s].values[c] : 0.0;
      const double top = y.map(v, kH - kBottom, kTop);
      d.rect(x0 + bar * s, top, bar * 0.9, kH - kBottom - top, series[s].colour);
    }
    d.text(kLeft + slot * (c + 0.5), kH - kBottom + 18, categories[c], 12, "middle");
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    d.rect(kW - kRight - 150, kTop + 18.0 * s, 12, 12, series[s].colour);
    d.text(kW - kRight - 132, kTop + 18.0 * s + 10, series[s].name, 11);
  }
  return d.str();
}

std::string boxplot_chart(std::string_view title, const evaluate::BoxplotReport& learned,
                          const evaluate::BoxplotReport& rules) {
  Document d(kW, kH);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  int max_group = 1;
  for (const auto* r : {&learned, &rules}) {
    for (const auto& g : r->groups) {
      lo = std::min(lo, g.min);
      hi = std::max(hi, g.max);
      max_group = std::max(max_group, g.group);
    }
  }
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  const Axis y{lo, hi};
  frame(d, title, y);
  const double slot = (kW - kLeft - kRight) / max_group;
  const std::pair<const evaluate::BoxplotReport*, const char*> sides[] = {{&learned, "#3b75af"}, {&rules, "#ef8636"}};
  for (std::size_t side = 0; side < 2; ++side) {
    for (const auto& g : sides[side].first->groups) {
      const double x = kLeft + slot * (g.group - 1) + slot * (0.1 + 0.42 * side);
      const double w = slot * 0.36;
      const auto py = [&](double v) { return y.map(v, kH - kBottom, kTop); };
      d.line(x + w / 2, py(g.min), x + w / 2, py(g.max), "#555");
      d.rect(x, py(g.q3), w, py(g.q1) - py(g.q3), sides[side].second, "#222");
      d.line(x, py(g.median), x + w, py(g.median), "#000", 2);
    }
  }
  for (int g = 1; g <= max_group; ++g) d.text(kLeft + slot * (g - 0.5), kH - kBottom + 18, std::to_string(g), 11, "middle");
  d.rect(kW - kRight - 150, kTop, 12, 12, "#3b75af");
  d.text(kW - kRight - 132, kTop + 10, "learned groups", 11);
  d.rect(kW - kRight - 150, kTop + 18, 12, 12, "#ef8636");
  d.text(kW - kRight - 132, kTop + 28, "rule groups", 11);
  return d.str();
}

std::string scatter_chart(std::string_view title, std::string_view x_label, std::string_view y_label,
                          const std::vector<std::pair<double, double>>& points) {
  Document d(kW, kH);
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const auto& [x, y] : points) {
    xlo = std::min(xlo, x), xhi = std::max(xhi, x), ylo = std::min(ylo, y), yhi = std::max(yhi, y);
  }
  if (points.empty()) xlo = ylo = 0, xhi = yhi = 1;
  const Axis ax{xlo, xhi}, ay{ylo, yhi};
  frame(d, title, ay);
  // Identical points are drawn once with a size reflecting multiplicity.
  std::map<std::pair<double, double>, int> count;
  for (const auto& p : points) ++count[p];
  for (const auto& [p, c] : count) {
    d.circle(ax.map(p.first, kLeft + 10, kW - kRight - 10), ay.map(p.second, kH - kBottom, kTop),
             std::min(2.0 + std::sqrt(static_cast<double>(c)), 12.0), "#3b75af");
  }
  d.text(kW / 2, kH - 15, x_label, 12, "middle");
  d.text(15, kH / 2, y_label, 12, "start");
  return d.str();
}

}  // namespace casemix::svg
