#pragma once

#include <cmath>
#include <optional>
#include <string_view>
#include <vector>

namespace lstp::sim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

/// Rotates `p` by -theta (world -> body frame of something at heading theta).
inline Vec2 to_local(Vec2 p, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * p.x + s * p.y, -s * p.x + c * p.y};
}

/// Wraps to (-pi, pi].
double wrap_angle(double a);

/// Obstacle solids and their planar footprints:
///   sphere, cylinder -> disc of radius 0.5
///   cube             -> 1 x 1 square rotated by theta
///   capsule          -> stadium: segment of length 2 along theta, inflated by 0.5
enum class ObstacleKind { kSphere, kCube, kCapsule, kCylinder };

std::string_view kind_name(ObstacleKind kind);
ObstacleKind parse_kind(std::string_view name);

inline constexpr double kDiscRadius = 0.5;
inline constexpr double kCubeHalfSide = 0.5;
inline constexpr double kCapsuleHalfLength = 1.0;
inline constexpr double kCapsuleRadius = 0.5;

struct Obstacle {
  ObstacleKind kind = ObstacleKind::kSphere;
  Vec2 center;
  double theta = 0.0;  // [0, pi)

  friend bool operator==(const Obstacle&, const Obstacle&) = default;
};

/// Signed distance from `p` to the footprint boundary (negative inside).
double signed_distance(const Obstacle& ob, Vec2 p);

/// Radius of the smallest disc about `center` containing the footprint.
double bounding_radius(const Obstacle& ob);

/// Distance along the unit ray (origin, dir) to the footprint; 0 if the origin
/// is inside; nullopt if the ray misses.
std::optional<double> ray_distance(const Obstacle& ob, Vec2 origin, Vec2 dir);

std::optional<double> ray_disc(Vec2 origin, Vec2 dir, Vec2 center, double radius);

/// Distance between footprint boundaries; <= 0 when they overlap.
double footprint_gap(const Obstacle& a, const Obstacle& b);

/// Rectangular arena [0, width] x [0, height] whose boundary is a solid wall.
struct Arena {
  double width = 8.0;
  double height = 8.0;

  /// Distance from an interior point to the nearest wall (negative outside).
  double wall_distance(Vec2 p) const {
    return std::min(std::min(p.x, width - p.x), std::min(p.y, height - p.y));
  }
  /// Distance from an interior point to the wall along a unit direction.
  double ray_to_wall(Vec2 origin, Vec2 dir) const;
  bool contains(Vec2 p, double margin) const { return wall_distance(p) >= margin; }
};

/// Boundary points of a footprint, spaced roughly `spacing` apart.
std::vector<Vec2> sample_boundary(const Obstacle& ob, double spacing);

}  // namespace lstp::sim
