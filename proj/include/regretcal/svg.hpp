#pragma once

// Static SVG figures: reliability diagram and per-bin grouping-regret bounds.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "regretcal/binning.hpp"
#include "regretcal/detail/text.hpp"
#include "regretcal/regret.hpp"

namespace regretcal {

namespace detail {

struct Frame {
  double width = 480, height = 400, left = 60, right = 20, top = 30, bottom = 50;
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

inline std::string num(double v) {
  // two decimals are plenty for pixel coordinates and keep output stable
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << v;
  return os.str();
}

inline void axes(std::ostringstream& os, const Frame& f, const std::string& title, const std::string& xlabel,
                 const std::string& ylabel) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(f.width) << "\" height=\"" << num(f.height)
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(f.width / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
  os << "<line x1=\"" << num(f.px(f.x0)) << "\" y1=\"" << num(f.py(f.y0)) << "\" x2=\"" << num(f.px(f.x1)) << "\" y2=\""
     << num(f.py(f.y0)) << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << num(f.px(f.x0)) << "\" y1=\"" << num(f.py(f.y0)) << "\" x2=\"" << num(f.px(f.x0)) << "\" y2=\""
     << num(f.py(f.y1)) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    os << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(f.py(f.y0) + 15) << "\" text-anchor=\"middle\">"
       << format_double(std::round(xv * 1000) / 1000) << "</text>\n";
    os << "<text x=\"" << num(f.px(f.x0) - 5) << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">"
       << format_double(std::round(yv * 1000) / 1000) << "</text>\n";
  }
  os << "<text x=\"" << num(f.px((f.x0 + f.x1) / 2)) << "\" y=\"" << num(f.height - 12) << "\" text-anchor=\"middle\">"
     << xlabel << "</text>\n";
  os << "<text transform=\"translate(14," << num(f.py((f.y0 + f.y1) / 2)) << ") rotate(-90)\" text-anchor=\"middle\">"
     << ylabel << "</text>\n";
}

}  // namespace detail

/// Mean label against mean score per bin, with the diagonal and the t* lines.
inline std::string reliability_svg(const CalibrationCurveEstimate& curve, double t_star) {
  using detail::num;
  detail::Frame f;
  std::ostringstream os;
  detail::axes(os, f, "Reliability (t* = " + detail::format_double(t_star) + ")", "mean score", "mean label");
  os << "<line x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.py(0)) << "\" x2=\"" << num(f.px(1)) << "\" y2=\""
     << num(f.py(1)) << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  os << "<line x1=\"" << num(f.px(t_star)) << "\" y1=\"" << num(f.py(0)) << "\" x2=\"" << num(f.px(t_star)) << "\" y2=\""
     << num(f.py(1)) << "\" stroke=\"#c33\"/>\n";
  os << "<line x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.py(t_star)) << "\" x2=\"" << num(f.px(1)) << "\" y2=\""
     << num(f.py(t_star)) << "\" stroke=\"#c33\"/>\n";
  std::string path;
  for (const auto& b : curve.bins) {
    if (b.mass == 0) continue;
    path += (path.empty() ? "M" : " L") + num(f.px(b.mean_score)) + " " + num(f.py(b.mean_label));
  }
  if (!path.empty()) os << "<path d=\"" << path << "\" fill=\"none\" stroke=\"#236\" stroke-width=\"1.5\"/>\n";
  for (const auto& b : curve.bins) {
    if (b.mass == 0) continue;
    os << "<circle cx=\"" << num(f.px(b.mean_score)) << "\" cy=\"" << num(f.py(b.mean_label)) << "\" r=\"3\" fill=\"#236\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Per-bin band between the lower and upper grouping-regret bounds, the
/// midpoint estimate, and the calibration regret.
inline std::string regret_svg(const RegretReport& rep) {
  using detail::num;
  detail::Frame f;
  double ymax = 0.0;
  for (const auto& b : rep.bins) ymax = std::max({ymax, b.ugl_hat, b.rcl_hat});
  f.y1 = ymax > 0.0 ? ymax * 1.1 : 1.0;
  std::ostringstream os;
  detail::axes(os, f, "Per-bin regret (t* = " + detail::format_double(rep.t_star) + ")", "score bin", "utility");
  for (const auto& b : rep.bins) {
    if (b.mass == 0) continue;
    const double x0 = f.px(b.lo), x1 = f.px(b.hi);
    os << "<rect x=\"" << num(x0) << "\" y=\"" << num(f.py(b.ugl_hat)) << "\" width=\"" << num(std::max(x1 - x0, 0.5))
       << "\" height=\"" << num(std::max(f.py(b.lgl_hat) - f.py(b.ugl_hat), 0.0)) << "\" fill=\"#8ab\" fill-opacity=\"0.5\"/>\n";
    os << "<line x1=\"" << num(x0) << "\" y1=\"" << num(f.py(b.rgl_hat)) << "\" x2=\"" << num(x1) << "\" y2=\""
       << num(f.py(b.rgl_hat)) << "\" stroke=\"#236\"/>\n";
    os << "<line x1=\"" << num(x0) << "\" y1=\"" << num(f.py(b.rcl_hat)) << "\" x2=\"" << num(x1) << "\" y2=\""
       << num(f.py(b.rcl_hat)) << "\" stroke=\"#c33\" stroke-dasharray=\"3 2\"/>\n";
  }
  os << "<text x=\"" << num(f.width - f.right) << "\" y=\"" << num(f.top + 10)
     << "\" text-anchor=\"end\">band: grouping bounds, solid: midpoint, dashed: calibration</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace regretcal
