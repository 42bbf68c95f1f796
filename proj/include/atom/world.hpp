#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "atom/common.hpp"

namespace atom::world {

struct Vec2 {
  double x = 0.0, y = 0.0;
};

/// Global vehicle pose; theta is kept in (-pi, pi].
struct Pose {
  double x = 0.0, y = 0.0, theta = 0.0;
};

/// Obstacle-relative state: distance d to the obstacle center and relative
/// heading alpha = heading - line-of-sight bearing (alpha = 0 means the
/// vehicle points straight at the obstacle).
struct RelState {
  double d = 0.0;      // > 0
  double alpha = 0.0;  // wrapped to (-pi, pi]
};

struct Control {
  double v = 0.0;      // longitudinal velocity [m/s]
  double omega = 0.0;  // yaw rate [rad/s]
};

enum class Shape { kCircle, kSquare, kTriangle, kStar, kRectangle };

/// Single static obstacle. `size` is the radius for circles, the side
/// length for square/triangle, the outer radius for the 5-point star and
/// the long side for the rectangle (aspect ratio 2:1).
struct Obstacle {
  Shape shape = Shape::kCircle;
  Vec2 center{};
  double size = 1.0;
  double orientation = 0.0;
};

struct ScanConfig {
  int n_beams = 64;
  double fov = kTwoPi;  // 360 degree field of view by default
  double max_range = 10.0;
  double beam_0_offset = 0.0;
};

/// Synthetic sensor degradation: out = clamp(gain * r + bias + sigma * N(0,1)).
/// gain = 1, bias = 0, noise_sigma = 0 is the identity and returns the
/// input unchanged.
struct CorruptionSpec {
  double gain = 1.0;
  double bias = 0.0;
  double noise_sigma = 0.0;
};

/// Sign of the v*sin(alpha)/d coupling in alpha-dot. Fixed once by the
/// finite-difference consistency check against the global flow (see the
/// world tests); the relative model and the filter Lie derivatives share it.
inline constexpr double kAlphaCouplingSign = +1.0;

RelState relative_state(const Pose& pose, const Vec2& obstacle_center);

/// Relative dynamics: d_dot = -v cos(alpha),
/// alpha_dot = kAlphaCouplingSign * v sin(alpha)/d + omega.
std::array<double, 2> rel_dynamics(const RelState& x, const Control& u);

/// RK4 step of the global unicycle kinematics.
Pose step_global(const Pose& pose, const Control& u, double dt);

/// Closed vertex list for polygonal shapes (not valid for circles).
std::vector<Vec2> polygon_vertices(const Obstacle& obstacle);

bool point_inside(const Obstacle& obstacle, const Vec2& p);

/// Radius of the smallest circle centered at obstacle.center containing it.
double min_enclosing_radius(const Obstacle& obstacle);

/// Ray-cast range scan. Beam i points at world angle
/// theta + beam_0_offset + i * fov / n_beams; entries are the distance to
/// the nearest ray-obstacle intersection, else max_range.
std::vector<double> scan(const Pose& pose, const Obstacle& obstacle,
                         const ScanConfig& cfg);

std::vector<double> corrupt_scan(const std::vector<double>& ranges,
                                 const CorruptionSpec& mode, std::uint64_t seed,
                                 double max_range);

}  // namespace atom::world
