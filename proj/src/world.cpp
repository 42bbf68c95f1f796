#include "atom/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace atom::world {

RelState relative_state(const Pose& pose, const Vec2& c) {
  const double dx = c.x - pose.x;
  const double dy = c.y - pose.y;
  const double d = std::hypot(dx, dy);
  if (d < 1e-12)
    throw DegenerateGeometry("relative_state: pose coincides with obstacle center");
  return {d, wrap_angle(pose.theta - std::atan2(dy, dx))};
}

std::array<double, 2> rel_dynamics(const RelState& x, const Control& u) {
  if (x.d <= 0.0) throw ContractViolation("rel_dynamics: d must be positive");
  const double d_dot = -u.v * std::cos(x.alpha);
  const double a_dot = kAlphaCouplingSign * u.v * std::sin(x.alpha) / x.d + u.omega;
  return {d_dot, a_dot};
}

Pose step_global(const Pose& pose, const Control& u, double dt) {
  if (dt <= 0.0) throw ContractViolation("step_global: dt must be positive");
  auto deriv = [&u](const Pose& p) {
    return Pose{u.v * std::cos(p.theta), u.v * std::sin(p.theta), u.omega};
  };
  auto advance = [](const Pose& p, const Pose& k, double h) {
    return Pose{p.x + h * k.x, p.y + h * k.y, p.theta + h * k.theta};
  };
  const Pose k1 = deriv(pose);
  const Pose k2 = deriv(advance(pose, k1, 0.5 * dt));
  const Pose k3 = deriv(advance(pose, k2, 0.5 * dt));
  const Pose k4 = deriv(advance(pose, k3, dt));
  Pose out{
      pose.x + dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
      pose.y + dt / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
      pose.theta + dt / 6.0 * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta)};
  // Re-wrap only when the heading actually left the interval; with omega = 0
  // the heading must come back bit-identical.
  if (out.theta > kPi || out.theta <= -kPi) out.theta = wrap_angle(out.theta);
  return out;
}

namespace {

Vec2 rotated(double x, double y, double ang) {
  const double c = std::cos(ang), s = std::sin(ang);
  return {x * c - y * s, x * s + y * c};
}

// Pentagram inner/outer vertex ratio, 1/phi^2.
constexpr double kStarInnerRatio = 0.3819660112501051;

}  // namespace

std::vector<Vec2> polygon_vertices(const Obstacle& o) {
  if (o.size <= 0.0) throw ContractViolation("polygon_vertices: size must be > 0");
  std::vector<Vec2> local;
  switch (o.shape) {
    case Shape::kCircle:
      throw ContractViolation("polygon_vertices: circle has no vertex list");
    case Shape::kSquare: {
      const double h = o.size / 2.0;
      local = {{h, h}, {-h, h}, {-h, -h}, {h, -h}};
      break;
    }
    case Shape::kRectangle: {
      const double hx = o.size / 2.0, hy = o.size / 4.0;
      local = {{hx, hy}, {-hx, hy}, {-hx, -hy}, {hx, -hy}};
      break;
    }
    case Shape::kTriangle: {
      const double rad = o.size / std::sqrt(3.0);  // circumradius of equilateral
      for (int k = 0; k < 3; ++k) {
        const double a = kPi / 2.0 + k * kTwoPi / 3.0;
        local.push_back({rad * std::cos(a), rad * std::sin(a)});
      }
      break;
    }
    case Shape::kStar: {
      const double r_out = o.size;
      const double r_in = o.size * kStarInnerRatio;
      for (int k = 0; k < 10; ++k) {
        const double a = kPi / 2.0 + k * kPi / 5.0;
        const double rad = (k % 2 == 0) ? r_out : r_in;
        local.push_back({rad * std::cos(a), rad * std::sin(a)});
      }
      break;
    }
  }
  std::vector<Vec2> out;
  out.reserve(local.size());
  for (const Vec2& p : local) {
    Vec2 r = rotated(p.x, p.y, o.orientation);
    out.push_back({r.x + o.center.x, r.y + o.center.y});
  }
  return out;
}

bool point_inside(const Obstacle& o, const Vec2& p) {
  if (o.shape == Shape::kCircle)
    return std::hypot(p.x - o.center.x, p.y - o.center.y) < o.size;
  const std::vector<Vec2> v = polygon_vertices(o);
  // Even-odd crossing test.
  bool inside = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    const bool crosses = (v[i].y > p.y) != (v[j].y > p.y);
    if (crosses) {
      const double x_at =
          v[j].x + (v[i].x - v[j].x) * (p.y - v[j].y) / (v[i].y - v[j].y);
      if (p.x < x_at) inside = !inside;
    }
  }
  return inside;
}

double min_enclosing_radius(const Obstacle& o) {
  if (o.size <= 0.0)
    throw ContractViolation("min_enclosing_radius: size must be > 0");
  switch (o.shape) {
    case Shape::kCircle:
      return o.size;
    case Shape::kSquare:
      return o.size * std::sqrt(2.0) / 2.0;
    case Shape::kTriangle:
      return o.size / std::sqrt(3.0);
    case Shape::kStar:
      return o.size;
    case Shape::kRectangle:
      return std::hypot(o.size / 2.0, o.size / 4.0);
  }
  throw ContractViolation("min_enclosing_radius: unknown shape");
}

namespace {

constexpr double kRayEps = 1e-12;

// Smallest t > 0 with origin + t*dir on the circle, or +inf.
double ray_circle(const Vec2& origin, const Vec2& dir, const Vec2& center,
                  double radius) {
  const double ox = origin.x - center.x;
  const double oy = origin.y - center.y;
  const double b = 2.0 * (ox * dir.x + oy * dir.y);
  const double c = ox * ox + oy * oy - radius * radius;
  const double disc = b * b - 4.0 * c;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double sq = std::sqrt(disc);
  const double t1 = (-b - sq) / 2.0;
  const double t2 = (-b + sq) / 2.0;
  if (t1 > kRayEps) return t1;
  if (t2 > kRayEps) return t2;
  return std::numeric_limits<double>::infinity();
}

// Smallest t > 0 with origin + t*dir on segment [p, q], or +inf.
double ray_segment(const Vec2& origin, const Vec2& dir, const Vec2& p,
                   const Vec2& q) {
  const double ex = q.x - p.x, ey = q.y - p.y;
  const double denom = dir.x * ey - dir.y * ex;   // cross(dir, edge)
  if (std::abs(denom) < 1e-15) return std::numeric_limits<double>::infinity();
  const double wx = p.x - origin.x, wy = p.y - origin.y;
  const double t = (wx * ey - wy * ex) / denom;        // along the ray
  const double s = (wx * dir.y - wy * dir.x) / denom;  // along the edge
  if (t > kRayEps && s >= 0.0 && s <= 1.0) return t;
  return std::numeric_limits<double>::infinity();
}

}  // namespace

std::vector<double> scan(const Pose& pose, const Obstacle& obstacle,
                         const ScanConfig& cfg) {
  if (cfg.n_beams < 8) throw ContractViolation("scan: n_beams must be >= 8");
  if (cfg.fov <= 0.0 || cfg.fov > kTwoPi + 1e-12)
    throw ContractViolation("scan: fov must be in (0, 2*pi]");
  if (cfg.max_range <= 0.0)
    throw ContractViolation("scan: max_range must be > 0");
  if (point_inside(obstacle, {pose.x, pose.y}))
    throw DegenerateGeometry("scan: pose lies inside the obstacle");

  std::vector<Vec2> verts;
  if (obstacle.shape != Shape::kCircle) verts = polygon_vertices(obstacle);

  std::vector<double> ranges(std::size_t(cfg.n_beams), cfg.max_range);
  const Vec2 origin{pose.x, pose.y};
  const double step = cfg.fov / double(cfg.n_beams);
  for (int i = 0; i < cfg.n_beams; ++i) {
    const double ang = pose.theta + cfg.beam_0_offset + double(i) * step;
    const Vec2 dir{std::cos(ang), std::sin(ang)};
    double best = std::numeric_limits<double>::infinity();
    if (obstacle.shape == Shape::kCircle) {
      best = ray_circle(origin, dir, obstacle.center, obstacle.size);
    } else {
      for (std::size_t j = 0, k = verts.size() - 1; j < verts.size(); k = j++)
        best = std::min(best, ray_segment(origin, dir, verts[k], verts[j]));
    }
    if (best < cfg.max_range) ranges[std::size_t(i)] = best;
  }
  return ranges;
}

std::vector<double> corrupt_scan(const std::vector<double>& ranges,
                                 const CorruptionSpec& mode, std::uint64_t seed,
                                 double max_range) {
  if (mode.gain == 1.0 && mode.bias == 0.0 && mode.noise_sigma == 0.0)
    return ranges;
  Rng rng(seed);
  std::vector<double> out(ranges.size());
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    double r = mode.gain * ranges[i] + mode.bias;
    if (mode.noise_sigma > 0.0) r += mode.noise_sigma * rng.normal();
    out[i] = clamp(r, 0.0, max_range);
  }
  return out;
}

}  // namespace atom::world
