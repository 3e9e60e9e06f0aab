#include "windbench/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace windbench::plot {

namespace {

using diagnostics::PlotSeries;

constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;
constexpr const char* kColor = "#1f77b4";

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

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

struct Range {
  double lo = 0, hi = 1;
  void pad() {
    if (!(hi > lo)) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double p = 0.04 * (hi - lo);
    lo -= p;
    hi += p;
  }
};

struct Frame {
  double w, h;
  Range x, y;
  [[nodiscard]] double px(double v) const { return kLeft + (v - x.lo) / (x.hi - x.lo) * (w - kLeft - kRight); }
  [[nodiscard]] double py(double v) const { return h - kBottom - (v - y.lo) / (y.hi - y.lo) * (h - kTop - kBottom); }
};

Frame make_frame(const PlotSeries& s, int width, int height) {
  Frame f{static_cast<double>(width), static_cast<double>(height), {}, {}};
  bool any = false;
  for (const auto& [x, y] : s.points) {
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    if (!any) {
      f.x = {x, x};
      f.y = {y, y};
      any = true;
    }
    f.x.lo = std::min(f.x.lo, x);
    f.x.hi = std::max(f.x.hi, x);
    f.y.lo = std::min(f.y.lo, y);
    f.y.hi = std::max(f.y.hi, y);
  }
  f.x.pad();
  f.y.pad();
  return f;
}

void axes(std::ostringstream& o, const Frame& f, const std::string& title, const std::string& xl,
          const std::string& yl) {
  o << "<rect x=\"0\" y=\"0\" width=\"" << fmt(f.w) << "\" height=\"" << fmt(f.h) << "\" fill=\"white\"/>\n";
  o << "<text x=\"" << fmt(f.w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << escape(title)
    << "</text>\n";
  const double x0 = kLeft, x1 = f.w - kRight, y0 = f.h - kBottom, y1 = kTop;
  o << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y1) << "\" width=\"" << fmt(x1 - x0) << "\" height=\""
    << fmt(y0 - y1) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double vx = f.x.lo + (f.x.hi - f.x.lo) * k / 4.0;
    const double vy = f.y.lo + (f.y.hi - f.y.lo) * k / 4.0;
    o << "<text x=\"" << fmt(f.px(vx)) << "\" y=\"" << fmt(y0 + 16) << "\" text-anchor=\"middle\" font-size=\"11\">"
      << tick_label(vx) << "</text>\n";
    o << "<text x=\"" << fmt(x0 - 6) << "\" y=\"" << fmt(f.py(vy) + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
      << tick_label(vy) << "</text>\n";
  }
  o << "<text x=\"" << fmt((x0 + x1) / 2) << "\" y=\"" << fmt(f.h - 14)
    << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(xl) << "</text>\n";
  o << "<text x=\"16\" y=\"" << fmt((y0 + y1) / 2) << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
    << fmt((y0 + y1) / 2) << ")\">" << escape(yl) << "</text>\n";
}

void reference(std::ostringstream& o, const Frame& f, const diagnostics::ReferenceLine& r) {
  // Clip y = a x + b to the plotting box by sampling the line at both x edges
  // and intersecting with the y range.
  double xa = f.x.lo, xb = f.x.hi;
  if (r.slope != 0.0) {
    const double xlo = (f.y.lo - r.intercept) / r.slope;
    const double xhi = (f.y.hi - r.intercept) / r.slope;
    xa = std::max(xa, std::min(xlo, xhi));
    xb = std::min(xb, std::max(xlo, xhi));
  } else if (r.intercept < f.y.lo || r.intercept > f.y.hi) {
    return;
  }
  if (!(xb > xa)) return;
  o << "<line x1=\"" << fmt(f.px(xa)) << "\" y1=\"" << fmt(f.py(r.slope * xa + r.intercept)) << "\" x2=\""
    << fmt(f.px(xb)) << "\" y2=\"" << fmt(f.py(r.slope * xb + r.intercept))
    << "\" stroke=\"#555555\" stroke-dasharray=\"6 4\"/>\n";
}

void draw(std::ostringstream& o, const Frame& f, const PlotSeries& s, const char* color) {
  if (s.connect) {
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      o << (first ? "" : " ") << fmt(f.px(x)) << "," << fmt(f.py(y));
      first = false;
    }
    o << "\"/>\n";
    return;
  }
  o << "<g fill=\"" << color << "\" fill-opacity=\"0.6\">\n";
  for (const auto& [x, y] : s.points) {
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    o << "<circle cx=\"" << fmt(f.px(x)) << "\" cy=\"" << fmt(f.py(y)) << "\" r=\"2\"/>\n";
  }
  o << "</g>\n";
}

std::string header(int width, int height) {
  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
    << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
    << "\" font-family=\"sans-serif\">\n";
  return o.str();
}

}  // namespace

std::string render_svg(const PlotSeries& s, int width, int height) {
  const Frame f = make_frame(s, width, height);
  std::ostringstream o;
  o << header(width, height);
  axes(o, f, s.title, s.x_label, s.y_label);
  if (s.kind != diagnostics::PlotKind::EpochLoss) reference(o, f, s.reference);
  draw(o, f, s, kColor);
  o << "</svg>\n";
  return o.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

void write_svg(const std::filesystem::path& path, const PlotSeries& s) { write_text(path, render_svg(s)); }

void write_series_csv(const std::filesystem::path& path, const PlotSeries& s) {
  std::ostringstream o;
  auto col = [](const std::string& label) {
    std::string c = label;
    std::replace(c.begin(), c.end(), ',', ';');
    return c;
  };
  o << col(s.x_label) << "," << col(s.y_label) << "\n";
  char buf[64];
  for (const auto& [x, y] : s.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x, y);
    o << buf;
  }
  write_text(path, o.str());
}

}  // namespace windbench::plot
