#include "lstp/sim/geometry.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numbers>
#include <string>

#include "lstp/error.hpp"

namespace lstp::sim {

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

std::string_view kind_name(ObstacleKind kind) {
  switch (kind) {
    case ObstacleKind::kSphere: return "sphere";
    case ObstacleKind::kCube: return "cube";
    case ObstacleKind::kCapsule: return "capsule";
    case ObstacleKind::kCylinder: return "cylinder";
  }
  return "sphere";
}

ObstacleKind parse_kind(std::string_view name) {
  if (name == "sphere") return ObstacleKind::kSphere;
  if (name == "cube") return ObstacleKind::kCube;
  if (name == "capsule") return ObstacleKind::kCapsule;
  if (name == "cylinder") return ObstacleKind::kCylinder;
  throw ConfigError("unknown obstacle kind '" + std::string(name) + "'");
}

namespace {

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}

// Ray vs axis-aligned box [-hx, hx] x [-hy, hy] in the box frame.
std::optional<double> ray_box(Vec2 o, Vec2 d, double hx, double hy) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  const std::array<double, 2> origin{o.x, o.y}, dir{d.x, d.y}, half{hx, hy};
  for (int i = 0; i < 2; ++i) {
    if (std::abs(dir[i]) < 1e-15) {
      if (origin[i] < -half[i] || origin[i] > half[i]) return std::nullopt;
    } else {
      double t1 = (-half[i] - origin[i]) / dir[i];
      double t2 = (half[i] - origin[i]) / dir[i];
      if (t1 > t2) std::swap(t1, t2);
      tmin = std::max(tmin, t1);
      tmax = std::min(tmax, t2);
    }
  }
  if (tmax < tmin || tmax < 0.0) return std::nullopt;
  return std::max(tmin, 0.0);
}

// Core geometry: a convex point set (1, 2 or 4 vertices, CCW) inflated by a radius.
struct Core {
  std::vector<Vec2> pts;
  double radius = 0.0;
};

Core core_of(const Obstacle& ob) {
  switch (ob.kind) {
    case ObstacleKind::kSphere:
    case ObstacleKind::kCylinder: return {{ob.center}, kDiscRadius};
    case ObstacleKind::kCapsule: {
      const Vec2 axis = kCapsuleHalfLength * unit(ob.theta);
      return {{ob.center - axis, ob.center + axis}, kCapsuleRadius};
    }
    case ObstacleKind::kCube: {
      const Vec2 u = kCubeHalfSide * unit(ob.theta);
      const Vec2 v = kCubeHalfSide * unit(ob.theta + std::numbers::pi / 2);
      return {{ob.center - u - v, ob.center + u - v, ob.center + u + v, ob.center - u + v}, 0.0};
    }
  }
  return {};
}

bool inside_polygon(Vec2 p, const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    if (cross(poly[(i + 1) % poly.size()] - poly[i], p - poly[i]) < 0) return false;
  }
  return true;
}

double point_core_distance(Vec2 p, const std::vector<Vec2>& pts) {
  if (pts.size() == 1) return norm(p - pts[0]);
  if (inside_polygon(p, pts)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  const std::size_t edges = pts.size() == 2 ? 1 : pts.size();
  for (std::size_t i = 0; i < edges; ++i) best = std::min(best, segment_distance(p, pts[i], pts[(i + 1) % pts.size()]));
  return best;
}

double core_distance(const Core& a, const Core& b) {
  const std::size_t ea = a.pts.size() <= 2 ? a.pts.size() - 1 : a.pts.size();
  const std::size_t eb = b.pts.size() <= 2 ? b.pts.size() - 1 : b.pts.size();
  for (std::size_t i = 0; i < ea; ++i) {
    for (std::size_t j = 0; j < eb; ++j) {
      if (segments_intersect(a.pts[i], a.pts[(i + 1) % a.pts.size()], b.pts[j], b.pts[(j + 1) % b.pts.size()])) {
        return 0.0;
      }
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (Vec2 p : a.pts) best = std::min(best, point_core_distance(p, b.pts));
  for (Vec2 p : b.pts) best = std::min(best, point_core_distance(p, a.pts));
  return best;
}

}  // namespace

double signed_distance(const Obstacle& ob, Vec2 p) {
  switch (ob.kind) {
    case ObstacleKind::kSphere:
    case ObstacleKind::kCylinder: return norm(p - ob.center) - kDiscRadius;
    case ObstacleKind::kCapsule: {
      const Vec2 axis = kCapsuleHalfLength * unit(ob.theta);
      return segment_distance(p, ob.center - axis, ob.center + axis) - kCapsuleRadius;
    }
    case ObstacleKind::kCube: {
      const Vec2 q = to_local(p - ob.center, ob.theta);
      const double qx = std::abs(q.x) - kCubeHalfSide, qy = std::abs(q.y) - kCubeHalfSide;
      const double outside = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
      return outside + std::min(std::max(qx, qy), 0.0);
    }
  }
  return 0.0;
}

double bounding_radius(const Obstacle& ob) {
  switch (ob.kind) {
    case ObstacleKind::kSphere:
    case ObstacleKind::kCylinder: return kDiscRadius;
    case ObstacleKind::kCapsule: return kCapsuleHalfLength + kCapsuleRadius;
    case ObstacleKind::kCube: return kCubeHalfSide * std::numbers::sqrt2;
  }
  return 0.0;
}

std::optional<double> ray_disc(Vec2 origin, Vec2 dir, Vec2 center, double radius) {
  const Vec2 oc = origin - center;
  const double b = dot(oc, dir);
  const double c = dot(oc, oc) - radius * radius;
  if (c <= 0.0) return 0.0;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double t = -b - std::sqrt(disc);
  if (t < 0.0) return std::nullopt;
  return t;
}

std::optional<double> ray_distance(const Obstacle& ob, Vec2 origin, Vec2 dir) {
  switch (ob.kind) {
    case ObstacleKind::kSphere:
    case ObstacleKind::kCylinder: return ray_disc(origin, dir, ob.center, kDiscRadius);
    case ObstacleKind::kCube:
      return ray_box(to_local(origin - ob.center, ob.theta), to_local(dir, ob.theta), kCubeHalfSide,
                     kCubeHalfSide);
    case ObstacleKind::kCapsule: {
      // Union of the two end discs and the central rectangle; the first entry
      // into the union is the earliest entry into any part.
      const Vec2 axis = kCapsuleHalfLength * unit(ob.theta);
      std::optional<double> best;
      auto take = [&](std::optional<double> t) {
        if (t && (!best || *t < *best)) best = t;
      };
      take(ray_disc(origin, dir, ob.center - axis, kCapsuleRadius));
      take(ray_disc(origin, dir, ob.center + axis, kCapsuleRadius));
      take(ray_box(to_local(origin - ob.center, ob.theta), to_local(dir, ob.theta), kCapsuleHalfLength,
                   kCapsuleRadius));
      return best;
    }
  }
  return std::nullopt;
}

double footprint_gap(const Obstacle& a, const Obstacle& b) {
  const Core ca = core_of(a), cb = core_of(b);
  return core_distance(ca, cb) - ca.radius - cb.radius;
}

double Arena::ray_to_wall(Vec2 origin, Vec2 dir) const {
  double t = std::numeric_limits<double>::infinity();
  if (dir.x > 0) t = std::min(t, (width - origin.x) / dir.x);
  if (dir.x < 0) t = std::min(t, -origin.x / dir.x);
  if (dir.y > 0) t = std::min(t, (height - origin.y) / dir.y);
  if (dir.y < 0) t = std::min(t, -origin.y / dir.y);
  return std::max(t, 0.0);
}

std::vector<Vec2> sample_boundary(const Obstacle& ob, double spacing) {
  std::vector<Vec2> out;
  auto arc = [&](Vec2 c, double r, double a0, double a1) {
    const auto n = static_cast<std::size_t>(std::ceil(r * (a1 - a0) / spacing)) + 1;
    for (std::size_t i = 0; i <= n; ++i) out.push_back(c + r * unit(a0 + (a1 - a0) * i / n));
  };
  auto line = [&](Vec2 a, Vec2 b) {
    const auto n = static_cast<std::size_t>(std::ceil(norm(b - a) / spacing)) + 1;
    for (std::size_t i = 0; i <= n; ++i) out.push_back(a + (static_cast<double>(i) / n) * (b - a));
  };
  switch (ob.kind) {
    case ObstacleKind::kSphere:
    case ObstacleKind::kCylinder: arc(ob.center, kDiscRadius, 0.0, 2 * std::numbers::pi); break;
    case ObstacleKind::kCube: {
      const auto c = core_of(ob).pts;
      for (std::size_t i = 0; i < 4; ++i) line(c[i], c[(i + 1) % 4]);
      break;
    }
    case ObstacleKind::kCapsule: {
      const Vec2 axis = kCapsuleHalfLength * unit(ob.theta);
      const Vec2 off = kCapsuleRadius * unit(ob.theta + std::numbers::pi / 2);
      line(ob.center - axis + off, ob.center + axis + off);
      line(ob.center - axis - off, ob.center + axis - off);
      arc(ob.center + axis, kCapsuleRadius, ob.theta - std::numbers::pi / 2, ob.theta + std::numbers::pi / 2);
      arc(ob.center - axis, kCapsuleRadius, ob.theta + std::numbers::pi / 2, ob.theta + 1.5 * std::numbers::pi);
      break;
    }
  }
  return out;
}

}  // namespace lstp::sim
