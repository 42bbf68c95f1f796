#pragma once

// Minimal SVG writer for the batch figures (trajectories and time series).

#include <string>
#include <vector>

namespace atom::svg {

struct Point {
  double x, y;
};

/// One cartesian panel mapped into a pixel viewport. Data coordinates are
/// set by fit()/set_range; y grows upward.
class Panel {
 public:
  Panel(double px, double py, double width, double height, std::string title);

  void set_title(const std::string& t) { title_ = t; }
  void set_range(double x_lo, double x_hi, double y_lo, double y_hi);
  void fit(const std::vector<Point>& pts, double pad_frac = 0.08);
  void expand_to(const std::vector<Point>& pts);

  void polyline(const std::vector<Point>& pts, const std::string& color,
                double width = 1.5, double opacity = 1.0);
  void polygon(const std::vector<Point>& pts, const std::string& fill,
               double opacity);
  void circle(Point center, double radius_data, const std::string& stroke,
              const std::string& fill, double opacity = 1.0);
  void marker(Point at, const std::string& color, double radius_px = 4.0);
  void hline(double y, const std::string& color, double width = 1.0);
  void legend(const std::vector<std::pair<std::string, std::string>>& entries);

  std::string render() const;  // inner SVG of this panel incl. axes

 private:
  Point to_px(Point p) const;
  double sx() const;
  double sy() const;
  double px_, py_, w_, h_;
  double xlo_ = 0, xhi_ = 1, ylo_ = 0, yhi_ = 1;
  bool has_range_ = false;
  std::string title_;
  std::string body_;
  friend class Figure;
};

/// A row of panels written to one .svg file.
class Figure {
 public:
  Figure(int n_panels, double panel_w = 360, double panel_h = 320);
  Panel& panel(int i) { return panels_[std::size_t(i)]; }
  void save(const std::string& path) const;

 private:
  double width_, height_;
  std::vector<Panel> panels_;
};

}  // namespace atom::svg
