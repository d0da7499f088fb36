#pragma once

#include <cmath>
#include <vector>

#include "ulsd/error.hpp"

namespace ulsd {

// Image-plane point in pixels, origin at the top-left corner.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Point2& operator+=(const Point2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Point2& operator-=(const Point2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Point2& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }

  friend constexpr Point2 operator+(Point2 a, const Point2& b) { return a += b; }
  friend constexpr Point2 operator-(Point2 a, const Point2& b) { return a -= b; }
  friend constexpr Point2 operator*(Point2 a, double s) { return a *= s; }
  friend constexpr Point2 operator*(double s, Point2 a) { return a *= s; }
  friend constexpr bool operator==(const Point2&, const Point2&) = default;
};

using Polyline = std::vector<Point2>;

inline double squared_norm(const Point2& p) { return p.x * p.x + p.y * p.y; }
inline double norm(const Point2& p) { return std::hypot(p.x, p.y); }
inline double distance(const Point2& a, const Point2& b) { return norm(a - b); }
inline double squared_distance(const Point2& a, const Point2& b) {
  return squared_norm(a - b);
}

inline bool is_finite(const Point2& p) {
  return std::isfinite(p.x) && std::isfinite(p.y);
}

// Unit-sphere direction for spherical cameras.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend constexpr Vec3 operator+(const Vec3& a, const Vec3& b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend constexpr Vec3 operator-(const Vec3& a, const Vec3& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend constexpr Vec3 operator*(double s, const Vec3& a) {
    return {s * a.x, s * a.y, s * a.z};
  }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  if (!(n > 0.0)) throw DegenerateInputError("cannot normalize a zero vector");
  return (1.0 / n) * v;
}

}  // namespace ulsd
