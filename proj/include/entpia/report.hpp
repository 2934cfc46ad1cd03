#pragma once

// CSV tables (RFC 4180) and static SVG line plots.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "entpia/core.hpp"

namespace entpia {

using Cell = std::variant<double, long long, std::string, bool>;

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string format_cell(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) {
    if (std::isnan(*d)) return "nan";
    std::ostringstream os;
    os.precision(17);
    os << *d;
    return os.str();
  }
  if (const long long* i = std::get_if<long long>(&c)) return std::to_string(*i);
  if (const bool* b = std::get_if<bool>(&c)) return *b ? "true" : "false";
  return csv_escape(std::get<std::string>(c));
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;

  void write_csv(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << csv_escape(header[i]);
    os << "\r\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_cell(r[i]);
      os << "\r\n";
    }
  }
};

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line plot with optional log axes; non-positive values are skipped on log axes.
inline void write_svg_plot(const std::filesystem::path& path, const std::string& title, const std::string& xlabel,
                           const std::string& ylabel, const std::vector<Series>& series, bool logx, bool logy) {
  const double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
  auto tx = [&](double v) { return logx ? std::log10(v) : v; };
  auto ty = [&](double v) { return logy ? std::log10(v) : v; };
  auto ok = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!logx || x > 0) && (!logy || y > 0);
  };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (ok(s.x[i], s.y[i])) {
        x0 = std::min(x0, tx(s.x[i]));
        x1 = std::max(x1, tx(s.x[i]));
        y0 = std::min(y0, ty(s.y[i]));
        y1 = std::max(y1, ty(s.y[i]));
      }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  auto label = [](double v, bool lg) {
    std::ostringstream s;
    s.precision(3);
    if (lg) s << "1e" << v;
    else s << v;
    return s.str();
  };
  for (int t = 0; t <= 4; ++t) {
    const double fx = x0 + (x1 - x0) * t / 4.0, fy = y0 + (y1 - y0) * t / 4.0;
    const double sx = L + (W - L - R) * t / 4.0, sy = H - B - (H - T - B) * t / 4.0;
    os << "<text x=\"" << sx << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
       << label(fx, logx) << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << label(fy, logy)
       << "</text>\n";
  }
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << H / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 " << H / 2 << ")\">" << ylabel
     << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    std::ostringstream pts;
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (ok(s.x[i], s.y[i])) pts << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    const char* c = colors[k % std::size(colors)];
    os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
    os << "<text x=\"" << W - R - 150 << "\" y=\"" << T + 14 * (k + 1) << "\" font-size=\"11\" fill=\"" << c << "\">"
       << s.name << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace entpia
