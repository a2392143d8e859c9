#include "jmppc/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace jmppc {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Mapper {
  double x0, x1, y0, y1;  // data ranges
  double left, right, top, bottom;  // pixel frame
  double px(double x) const { return left + (x - x0) / (x1 - x0) * (right - left); }
  double py(double y) const { return bottom - (y - y0) / (y1 - y0) * (bottom - top); }
};

void polyline(std::ofstream& out, const Mapper& map, const std::vector<double>& grid,
              const std::vector<double>& values, const std::string& style) {
  out << "<polyline fill=\"none\" " << style << " points=\"";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (k) out << " ";
    out << num(map.px(grid[k])) << "," << num(map.py(values[k]));
  }
  out << "\"/>\n";
}

// round-ish tick positions covering [a, b]
std::vector<double> ticks(double a, double b, int target = 6) {
  const double span = b - a;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double mult : {1.0, 2.0, 5.0, 10.0}) {
    if (mag * mult >= raw) {
      step = mag * mult;
      break;
    }
  }
  std::vector<double> t;
  for (double v = std::ceil(a / step) * step; v <= b + 1e-9 * span; v += step) t.push_back(v);
  return t;
}

}  // namespace

void write_check_svg(const CheckReport& report, const std::string& path, int width, int height) {
  if (report.observed.grid.size() < 2) throw std::runtime_error("check report has no curve");
  Mapper map;
  map.x0 = report.observed.grid.front();
  map.x1 = report.observed.grid.back();
  double lo = *std::min_element(report.observed.values.begin(), report.observed.values.end());
  double hi = *std::max_element(report.observed.values.begin(), report.observed.values.end());
  for (const auto& rep : report.replicates) {
    lo = std::min(lo, *std::min_element(rep.values.begin(), rep.values.end()));
    hi = std::max(hi, *std::max_element(rep.values.begin(), rep.values.end()));
  }
  for (double v : report.band_lower) lo = std::min(lo, v);
  for (double v : report.band_upper) hi = std::max(hi, v);
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  map.y0 = lo - pad;
  map.y1 = hi + pad;
  map.left = 64;
  map.right = width - 16;
  map.top = 32;
  map.bottom = height - 44;

  std::ofstream out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << report.statistic << " ("
      << report.regime << ")</text>\n";

  for (const auto& rep : report.replicates)
    polyline(out, map, rep.grid, rep.values, "stroke=\"#9a9a9a\" stroke-width=\"1\"");
  if (!report.band_lower.empty()) {
    polyline(out, map, report.observed.grid, report.band_lower,
             "stroke=\"black\" stroke-width=\"1\" stroke-dasharray=\"5,4\"");
    polyline(out, map, report.observed.grid, report.band_upper,
             "stroke=\"black\" stroke-width=\"1\" stroke-dasharray=\"5,4\"");
  }
  polyline(out, map, report.observed.grid, report.observed.values,
           "stroke=\"black\" stroke-width=\"2\"");

  // frame and ticks
  out << "<rect x=\"" << num(map.left) << "\" y=\"" << num(map.top) << "\" width=\""
      << num(map.right - map.left) << "\" height=\"" << num(map.bottom - map.top)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ticks(map.x0, map.x1)) {
    const double x = map.px(t);
    out << "<line x1=\"" << num(x) << "\" y1=\"" << num(map.bottom) << "\" x2=\"" << num(x)
        << "\" y2=\"" << num(map.bottom + 5) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << num(x) << "\" y=\"" << num(map.bottom + 20)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << num(t)
        << "</text>\n";
  }
  for (double t : ticks(map.y0, map.y1)) {
    const double y = map.py(t);
    out << "<line x1=\"" << num(map.left - 5) << "\" y1=\"" << num(y) << "\" x2=\""
        << num(map.left) << "\" y2=\"" << num(y) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << num(map.left - 8) << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(t)
        << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("cannot write " + path);
}

}  // namespace jmppc
