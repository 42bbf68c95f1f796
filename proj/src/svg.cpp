#include "atom/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace atom::svg {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

Panel::Panel(double px, double py, double width, double height, std::string title)
    : px_(px), py_(py), w_(width), h_(height), title_(std::move(title)) {}

void Panel::set_range(double x_lo, double x_hi, double y_lo, double y_hi) {
  xlo_ = x_lo;
  xhi_ = x_hi == x_lo ? x_lo + 1.0 : x_hi;
  ylo_ = y_lo;
  yhi_ = y_hi == y_lo ? y_lo + 1.0 : y_hi;
  has_range_ = true;
}

void Panel::fit(const std::vector<Point>& pts, double pad_frac) {
  if (pts.empty()) return;
  double xlo = pts[0].x, xhi = pts[0].x, ylo = pts[0].y, yhi = pts[0].y;
  for (const Point& p : pts) {
    xlo = std::min(xlo, p.x);
    xhi = std::max(xhi, p.x);
    ylo = std::min(ylo, p.y);
    yhi = std::max(yhi, p.y);
  }
  const double padx = (xhi - xlo + 1e-9) * pad_frac;
  const double pady = (yhi - ylo + 1e-9) * pad_frac;
  set_range(xlo - padx, xhi + padx, ylo - pady, yhi + pady);
}

void Panel::expand_to(const std::vector<Point>& pts) {
  if (!has_range_) {
    fit(pts);
    return;
  }
  for (const Point& p : pts) {
    xlo_ = std::min(xlo_, p.x);
    xhi_ = std::max(xhi_, p.x);
    ylo_ = std::min(ylo_, p.y);
    yhi_ = std::max(yhi_, p.y);
  }
}

double Panel::sx() const { return (w_ - 50.0) / (xhi_ - xlo_); }
double Panel::sy() const { return (h_ - 60.0) / (yhi_ - ylo_); }

Point Panel::to_px(Point p) const {
  return {px_ + 40.0 + (p.x - xlo_) * sx(),
          py_ + 30.0 + (yhi_ - p.y) * sy()};
}

void Panel::polyline(const std::vector<Point>& pts, const std::string& color,
                     double width, double opacity) {
  if (pts.size() < 2) return;
  std::ostringstream s;
  s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
    << width << "\" stroke-opacity=\"" << opacity << "\" points=\"";
  for (const Point& p : pts) {
    const Point q = to_px(p);
    s << fmt(q.x) << "," << fmt(q.y) << " ";
  }
  s << "\"/>\n";
  body_ += s.str();
}

void Panel::polygon(const std::vector<Point>& pts, const std::string& fill,
                    double opacity) {
  if (pts.size() < 3) return;
  std::ostringstream s;
  s << "<polygon fill=\"" << fill << "\" fill-opacity=\"" << opacity
    << "\" stroke=\"none\" points=\"";
  for (const Point& p : pts) {
    const Point q = to_px(p);
    s << fmt(q.x) << "," << fmt(q.y) << " ";
  }
  s << "\"/>\n";
  body_ += s.str();
}

void Panel::circle(Point center, double radius_data, const std::string& stroke,
                   const std::string& fill, double opacity) {
  const Point c = to_px(center);
  std::ostringstream s;
  s << "<ellipse cx=\"" << fmt(c.x) << "\" cy=\"" << fmt(c.y) << "\" rx=\""
    << fmt(radius_data * sx()) << "\" ry=\"" << fmt(radius_data * sy())
    << "\" stroke=\"" << stroke << "\" fill=\"" << fill << "\" fill-opacity=\""
    << opacity << "\" stroke-dasharray=\"4 3\"/>\n";
  body_ += s.str();
}

void Panel::marker(Point at, const std::string& color, double radius_px) {
  const Point c = to_px(at);
  std::ostringstream s;
  s << "<circle cx=\"" << fmt(c.x) << "\" cy=\"" << fmt(c.y) << "\" r=\""
    << radius_px << "\" fill=\"" << color << "\"/>\n";
  body_ += s.str();
}

void Panel::hline(double y, const std::string& color, double width) {
  const Point a = to_px({xlo_, y});
  const Point b = to_px({xhi_, y});
  std::ostringstream s;
  s << "<line x1=\"" << fmt(a.x) << "\" y1=\"" << fmt(a.y) << "\" x2=\""
    << fmt(b.x) << "\" y2=\"" << fmt(b.y) << "\" stroke=\"" << color
    << "\" stroke-width=\"" << width << "\" stroke-dasharray=\"5 4\"/>\n";
  body_ += s.str();
}

void Panel::legend(const std::vector<std::pair<std::string, std::string>>& entries) {
  double y = py_ + 42.0;
  std::ostringstream s;
  for (const auto& [label, color] : entries) {
    s << "<rect x=\"" << fmt(px_ + 48.0) << "\" y=\"" << fmt(y - 8.0)
      << "\" width=\"14\" height=\"4\" fill=\"" << color << "\"/>\n"
      << "<text x=\"" << fmt(px_ + 66.0) << "\" y=\"" << fmt(y)
      << "\" font-size=\"11\" font-family=\"sans-serif\">" << label
      << "</text>\n";
    y += 15.0;
  }
  body_ += s.str();
}

std::string Panel::render() const {
  std::ostringstream s;
  const Point o = to_px({xlo_, ylo_});
  const Point tr = to_px({xhi_, yhi_});
  s << "<text x=\"" << fmt(px_ + w_ / 2.0) << "\" y=\"" << fmt(py_ + 16.0)
    << "\" font-size=\"13\" font-family=\"sans-serif\" text-anchor=\"middle\">"
    << title_ << "</text>\n";
  s << "<rect x=\"" << fmt(tr.x - (w_ - 50.0)) << "\" y=\"" << fmt(tr.y)
    << "\" width=\"" << fmt(w_ - 50.0) << "\" height=\"" << fmt(h_ - 60.0)
    << "\" fill=\"none\" stroke=\"#888\"/>\n";
  // Corner tick labels keep the writer simple but the scales readable.
  s << "<text x=\"" << fmt(o.x) << "\" y=\"" << fmt(o.y + 14.0)
    << "\" font-size=\"10\" font-family=\"sans-serif\">" << fmt(xlo_)
    << "</text>\n";
  s << "<text x=\"" << fmt(tr.x) << "\" y=\"" << fmt(o.y + 14.0)
    << "\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"end\">"
    << fmt(xhi_) << "</text>\n";
  s << "<text x=\"" << fmt(o.x - 4.0) << "\" y=\"" << fmt(o.y)
    << "\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"end\">"
    << fmt(ylo_) << "</text>\n";
  s << "<text x=\"" << fmt(o.x - 4.0) << "\" y=\"" << fmt(tr.y + 10.0)
    << "\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"end\">"
    << fmt(yhi_) << "</text>\n";
  return s.str() + body_;
}

Figure::Figure(int n_panels, double panel_w, double panel_h)
    : width_(n_panels * panel_w), height_(panel_h) {
  for (int i = 0; i < n_panels; ++i)
    panels_.emplace_back(i * panel_w, 0.0, panel_w, panel_h, "");
}

void Figure::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_
      << "\" height=\"" << height_ << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const Panel& p : panels_) out << p.render();
  out << "</svg>\n";
}

}  // namespace atom::svg
