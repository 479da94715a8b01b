#include "bnbias/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace bnbias {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

std::string line_chart_svg(const std::vector<Series>& series, const ChartOptions& opts) {
  const double left = 70, right = 20, top = 40, bottom = 55;
  const double pw = opts.width - left - right, ph = opts.height - top - bottom;

  auto tx = [&](double x) { return opts.log_x ? std::log10(x) : x; };
  auto usable = [&](double x, double y) { return std::isfinite(x) && std::isfinite(y) && (!opts.log_x || x > 0.0); };

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      if (!usable(s.x[k], s.y[k])) continue;
      xmin = std::min(xmin, tx(s.x[k]));
      xmax = std::max(xmax, tx(s.x[k]));
      ymin = std::min(ymin, s.y[k]);
      ymax = std::max(ymax, s.y[k]);
    }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
  if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return left + (tx(x) - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opts.width << "\" height=\"" << opts.height
    << "\" viewBox=\"0 0 " << opts.width << ' ' << opts.height << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << num(opts.width / 2.0) << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
    << "font-size=\"15\">" << escape(opts.title) << "</text>\n"
    << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int k = 0; k <= 5; ++k) {
    const double fx = xmin + (xmax - xmin) * k / 5.0;
    const double sx = left + pw * k / 5.0;
    const double label = opts.log_x ? std::pow(10.0, fx) : fx;
    o << "<line x1=\"" << num(sx) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(sx) << "\" y2=\""
      << num(top + ph + 5) << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << num(sx) << "\" y=\"" << num(top + ph + 19) << "\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"11\">" << tick_label(label) << "</text>\n";
    const double fy = ymin + (ymax - ymin) * k / 5.0;
    const double sy = top + ph - ph * k / 5.0;
    o << "<line x1=\"" << num(left - 5) << "\" y1=\"" << num(sy) << "\" x2=\"" << num(left) << "\" y2=\"" << num(sy)
      << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << num(left - 8) << "\" y=\"" << num(sy + 4) << "\" text-anchor=\"end\" "
      << "font-family=\"sans-serif\" font-size=\"11\">" << tick_label(fy) << "</text>\n";
  }
  o << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(opts.height - 12.0)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape(opts.x_label)
    << (opts.log_x ? " (log scale)" : "") << "</text>\n"
    << "<text x=\"16\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
    << "font-size=\"13\" transform=\"rotate(-90 16 " << num(top + ph / 2) << ")\">" << escape(opts.y_label)
    << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    o << "<polyline fill=\"none\" stroke=\"" << kPalette[s % 10] << "\" stroke-width=\"1.2\" points=\"";
    bool first = true;
    for (std::size_t k = 0; k < std::min(ser.x.size(), ser.y.size()); ++k) {
      if (!usable(ser.x[k], ser.y[k])) continue;
      if (!first) o << ' ';
      first = false;
      o << num(px(ser.x[k])) << ',' << num(py(ser.y[k]));
    }
    o << "\"><title>" << escape(ser.label) << "</title></polyline>\n";
  }
  if (series.size() <= opts.max_legend) {
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double ly = top + 14 + 16.0 * static_cast<double>(s);
      o << "<line x1=\"" << num(left + pw - 150) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(left + pw - 130)
        << "\" y2=\"" << num(ly) << "\" stroke=\"" << kPalette[s % 10] << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << num(left + pw - 125) << "\" y=\"" << num(ly + 4) << "\" font-family=\"sans-serif\" "
        << "font-size=\"11\">" << escape(series[s].label) << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace bnbias
