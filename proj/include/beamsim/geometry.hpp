#pragma once

#include <algorithm>
#include <cmath>

namespace beamsim {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

/// Axis-aligned box given by its lower and upper corners.
struct Box {
  Vec3 lo;
  Vec3 hi;

  static Box from_center(const Vec3& center, const Vec3& dims) {
    const Vec3 half = dims * 0.5;
    return {center - half, center + half};
  }

  Vec3 center() const { return (lo + hi) * 0.5; }
  Vec3 dims() const { return hi - lo; }

  /// Open-interval overlap: boxes touching on a face do not overlap.
  bool overlaps(const Box& o) const {
    return lo.x < o.hi.x && o.lo.x < hi.x && lo.y < o.hi.y && o.lo.y < hi.y &&
           lo.z < o.hi.z && o.lo.z < hi.z;
  }

  /// Closed containment (surface points included).
  bool contains(const Vec3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
           p.z >= lo.z && p.z <= hi.z;
  }
};

/// True when the segment a-b intersects the (closed) box. Slab method.
inline bool segment_intersects_box(const Vec3& a, const Vec3& b,
                                   const Box& box) {
  const double d[3] = {b.x - a.x, b.y - a.y, b.z - a.z};
  const double o[3] = {a.x, a.y, a.z};
  const double lo[3] = {box.lo.x, box.lo.y, box.lo.z};
  const double hi[3] = {box.hi.x, box.hi.y, box.hi.z};

  double t0 = 0.0;
  double t1 = 1.0;
  for (int axis = 0; axis < 3; ++axis) {
    if (d[axis] == 0.0) {
      if (o[axis] < lo[axis] || o[axis] > hi[axis]) return false;
      continue;
    }
    double tn = (lo[axis] - o[axis]) / d[axis];
    double tf = (hi[axis] - o[axis]) / d[axis];
    if (tn > tf) std::swap(tn, tf);
    t0 = std::max(t0, tn);
    t1 = std::min(t1, tf);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace beamsim
