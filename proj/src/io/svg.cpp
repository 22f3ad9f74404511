#include "zcnas/io/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "zcnas/common/error.hpp"

namespace zc {

namespace {

constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi == lo) lo -= 0.5, hi += 0.5;
  }
};

std::string header(const std::string& title) {
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kW) + "\" height=\"" + num(kH) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kW / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + xml_escape(title) +
       "</text>\n";
  return s;
}

std::string axes(const Range& x, const Range& y, const std::string& xlabel, const std::string& ylabel,
                 bool x_ticks) {
  const double x0 = kLeft, x1 = kW - kRight, y0 = kH - kBottom, y1 = kTop;
  std::string s = "<g stroke=\"black\" fill=\"none\">\n";
  s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x1) + "\" y2=\"" + num(y0) + "\"/>\n";
  s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(y1) + "\"/>\n";
  s += "</g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = y.lo + (y.hi - y.lo) * i / 4.0;
    const double py = y0 - (y0 - y1) * i / 4.0;
    s += "<text x=\"" + num(x0 - 6) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"end\">" + label_num(v) + "</text>\n";
    if (x_ticks) {
      const double xv = x.lo + (x.hi - x.lo) * i / 4.0;
      const double px = x0 + (x1 - x0) * i / 4.0;
      s += "<text x=\"" + num(px) + "\" y=\"" + num(y0 + 16) + "\" text-anchor=\"middle\">" + label_num(xv) +
           "</text>\n";
    }
  }
  s += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kH - 12) + "\" text-anchor=\"middle\">" +
       xml_escape(xlabel) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num((y0 + y1) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num((y0 + y1) / 2) + ")\">" + xml_escape(ylabel) + "</text>\n";
  return s;
}

}  // namespace

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

std::string render_svg(const LineChart& c) {
  Range xr, yr;
  for (const auto& s : c.series) {
    if (s.xs.size() != s.ys.size()) throw Error("series '" + s.name + "': xs and ys differ in length");
    if ((!s.lo.empty() && s.lo.size() != s.xs.size()) || (!s.hi.empty() && s.hi.size() != s.xs.size()))
      throw Error("series '" + s.name + "': band length mismatch");
    for (double v : s.xs) xr.add(v);
    for (double v : s.ys) yr.add(v);
    for (double v : s.lo) yr.add(v);
    for (double v : s.hi) yr.add(v);
  }
  xr.finish();
  yr.finish();
  const double x0 = kLeft, x1 = kW - kRight, y0 = kH - kBottom, y1 = kTop;
  auto px = [&](double v) { return x0 + (v - xr.lo) / (xr.hi - xr.lo) * (x1 - x0); };
  auto py = [&](double v) { return y0 - (v - yr.lo) / (yr.hi - yr.lo) * (y0 - y1); };

  std::string out = header(c.title) + axes(xr, yr, c.xlabel, c.ylabel, true);
  for (std::size_t k = 0; k < c.series.size(); ++k) {
    const auto& s = c.series[k];
    const std::string color = kPalette[k % std::size(kPalette)];
    if (!s.lo.empty() && !s.hi.empty() && !s.xs.empty()) {
      std::string pts;
      for (std::size_t i = 0; i < s.xs.size(); ++i) pts += num(px(s.xs[i])) + "," + num(py(s.hi[i])) + " ";
      for (std::size_t i = s.xs.size(); i-- > 0;) pts += num(px(s.xs[i])) + "," + num(py(s.lo[i])) + " ";
      pts.pop_back();
      out += "<polygon points=\"" + pts + "\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    std::string pts;
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!std::isfinite(s.ys[i])) continue;
      if (!pts.empty()) pts += ' ';
      pts += num(px(s.xs[i])) + "," + num(py(s.ys[i]));
    }
    out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    const double ly = kTop + 16.0 * static_cast<double>(k);
    out += "<line x1=\"" + num(kW - kRight + 10) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(kW - kRight + 30) +
           "\" y2=\"" + num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(kW - kRight + 34) + "\" y=\"" + num(ly + 4) + "\">" + xml_escape(s.name) + "</text>\n";
  }
  return out + "</svg>\n";
}

std::string render_svg(const BarChart& c) {
  if (c.labels.size() != c.values.size()) throw Error("bar chart labels and values differ in length");
  Range yr;
  yr.add(0.0);
  for (double v : c.values) yr.add(v);
  yr.finish();
  const double x0 = kLeft, x1 = kW - kRight, y0 = kH - kBottom, y1 = kTop;
  auto py = [&](double v) { return y0 - (v - yr.lo) / (yr.hi - yr.lo) * (y0 - y1); };
  Range xr;
  std::string out = header(c.title) + axes(xr, yr, "", c.ylabel, false);
  const double n = static_cast<double>(std::max<std::size_t>(c.values.size(), 1));
  const double slot = (x1 - x0) / n;
  for (std::size_t i = 0; i < c.values.size(); ++i) {
    const double cx = x0 + slot * (static_cast<double>(i) + 0.5);
    if (std::isfinite(c.values[i])) {
      const double top = std::min(py(c.values[i]), py(0.0));
      const double h = std::abs(py(c.values[i]) - py(0.0));
      out += "<rect x=\"" + num(cx - slot * 0.35) + "\" y=\"" + num(top) + "\" width=\"" + num(slot * 0.7) +
             "\" height=\"" + num(h) + "\" fill=\"" + kPalette[i % std::size(kPalette)] + "\"/>\n";
    }
    out += "<text x=\"" + num(cx) + "\" y=\"" + num(y0 + 16) + "\" text-anchor=\"middle\">" + xml_escape(c.labels[i]) +
           "</text>\n";
  }
  return out + "</svg>\n";
}

}  // namespace zc
