#pragma once

#include <string>
#include <vector>

namespace zc {

struct LineSeries {
  std::string name;
  std::vector<double> xs, ys;
  // Optional band drawn beneath the line; empty or same length as xs.
  std::vector<double> lo, hi;
};

struct LineChart {
  std::string title, xlabel, ylabel;
  std::vector<LineSeries> series;
};

struct BarChart {
  std::string title, ylabel;
  std::vector<std::string> labels;
  std::vector<double> values;  // non-finite values are drawn as gaps
};

std::string xml_escape(const std::string& s);
std::string render_svg(const LineChart& c);
std::string render_svg(const BarChart& c);

}  // namespace zc
