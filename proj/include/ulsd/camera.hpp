#pragma once

// Camera models used to turn straight pinhole line annotations into the
// curved lines seen by fisheye and equirectangular (spherical) cameras.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "ulsd/error.hpp"
#include "ulsd/geometry.hpp"

namespace ulsd {

struct PinholeCamera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

/// Equidistant polynomial fisheye model:
///   theta   = atan(r),  r = |normalized pinhole coordinate|
///   theta_d = theta * (1 + k1 theta^2 + k2 theta^4 + k3 theta^6 + k4 theta^8)
/// and the distorted pixel is f * theta_d along the same ray direction.
///
/// Construction rejects coefficients for which theta_d is not strictly
/// increasing over [0, theta_max]; every later call relies on that.
class FisheyeIntrinsics {
 public:
  static constexpr double kDefaultThetaMax = std::numbers::pi / 2.0;

  FisheyeIntrinsics(double fx, double fy, double cx, double cy, std::array<double, 4> k,
                    double theta_max = kDefaultThetaMax)
      : fx_(fx), fy_(fy), cx_(cx), cy_(cy), k_(k), theta_max_(theta_max) {
    detail::require(std::isfinite(fx) && std::isfinite(fy) && fx > 0.0 && fy > 0.0,
                    "fisheye focal lengths must be positive");
    detail::require(std::isfinite(cx) && std::isfinite(cy), "non-finite principal point");
    for (double c : k_) detail::require(std::isfinite(c), "non-finite distortion coefficient");
    detail::require(theta_max > 0.0 && theta_max <= kDefaultThetaMax,
                    "theta_max must lie in (0, pi/2]");
    constexpr int kChecks = 4096;
    double previous = 0.0;
    for (int s = 1; s <= kChecks; ++s) {
      const double theta = theta_max_ * s / kChecks;
      const double td = distorted_angle(theta);
      if (!(derivative(theta) > 0.0) || !(td > previous)) {
        throw ValidationError("fisheye distortion is not monotone on [0, theta_max]");
      }
      previous = td;
    }
  }

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  const std::array<double, 4>& k() const { return k_; }
  double theta_max() const { return theta_max_; }

  double distorted_angle(double theta) const {
    const double t2 = theta * theta;
    return theta * (1.0 + t2 * (k_[0] + t2 * (k_[1] + t2 * (k_[2] + t2 * k_[3]))));
  }

  double derivative(double theta) const {
    const double t2 = theta * theta;
    return 1.0 + t2 * (3.0 * k_[0] + t2 * (5.0 * k_[1] + t2 * (7.0 * k_[2] + t2 * 9.0 * k_[3])));
  }

 private:
  double fx_, fy_, cx_, cy_;
  std::array<double, 4> k_;
  double theta_max_;
};

/// Equirectangular panorama: longitude maps to u, latitude to v.
class EquirectGrid {
 public:
  EquirectGrid(double width, double height) : width_(width), height_(height) {
    detail::require(height > 0.0 && std::isfinite(height), "equirect height must be positive");
    detail::require(width == 2.0 * height, "equirect width must equal twice the height");
  }
  double width() const { return width_; }
  double height() const { return height_; }

 private:
  double width_, height_;
};

using CameraModel = std::variant<PinholeCamera, FisheyeIntrinsics, EquirectGrid>;

inline std::string camera_type_name(const CameraModel& cam) {
  switch (cam.index()) {
    case 0: return "pinhole";
    case 1: return "fisheye";
    default: return "spherical";
  }
}

struct Projection {
  Point2 point;
  bool in_view = true;
};

inline Projection fisheye_distort(const Point2& p, const FisheyeIntrinsics& intr) {
  const double x = (p.x - intr.cx()) / intr.fx();
  const double y = (p.y - intr.cy()) / intr.fy();
  const double r = std::hypot(x, y);
  if (r == 0.0) return {{intr.cx(), intr.cy()}, true};
  const double theta = std::atan(r);
  const double scale = intr.distorted_angle(theta) / r;
  return {{intr.fx() * x * scale + intr.cx(), intr.fy() * y * scale + intr.cy()},
          theta <= intr.theta_max()};
}

/// Inverse of fisheye_distort. Solves theta_d(theta) = r_d by Newton's
/// method safeguarded with bisection on [0, theta_max].
inline Point2 fisheye_undistort(const Point2& p, const FisheyeIntrinsics& intr) {
  const double xd = (p.x - intr.cx()) / intr.fx();
  const double yd = (p.y - intr.cy()) / intr.fy();
  const double rd = std::hypot(xd, yd);
  if (rd == 0.0) return {intr.cx(), intr.cy()};

  double lo = 0.0;
  double hi = intr.theta_max();
  if (rd > intr.distorted_angle(hi)) {
    throw ValidationError("point lies outside the fisheye image circle");
  }
  double theta = std::min(rd, hi);
  double residual = intr.distorted_angle(theta) - rd;
  constexpr int kMaxIterations = 100;
  for (int it = 0; it < kMaxIterations && std::abs(residual) > 1e-15 * std::max(1.0, rd); ++it) {
    if (residual > 0.0) {
      hi = theta;
    } else {
      lo = theta;
    }
    double next = theta - residual / intr.derivative(theta);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == theta) break;
    theta = next;
    residual = intr.distorted_angle(theta) - rd;
  }
  if (!(std::abs(residual) <= 1e-8)) {
    throw NumericalError("fisheye undistortion did not converge");
  }
  if (theta >= std::numbers::pi / 2.0) {
    throw ValidationError("point maps to the pinhole plane at infinity");
  }
  const double scale = std::tan(theta) / rd;
  return {intr.fx() * xd * scale + intr.cx(), intr.fy() * yd * scale + intr.cy()};
}

/// Multiplies each distortion coefficient by an independent factor drawn
/// uniformly from [1 - relative, 1 + relative].
inline FisheyeIntrinsics perturb_distortion(const FisheyeIntrinsics& intr, double relative,
                                            std::mt19937_64& rng) {
  std::array<double, 4> k = intr.k();
  for (auto& c : k) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    c *= 1.0 + relative * (2.0 * u - 1.0);
  }
  return FisheyeIntrinsics(intr.fx(), intr.fy(), intr.cx(), intr.cy(), k, intr.theta_max());
}

// --- spherical -------------------------------------------------------------

/// Longitude atan2(y, x) in [-pi, pi) to u, latitude asin(z) to v. At the
/// exact poles the longitude is undefined and u is pinned to width/2.
inline Point2 project_sphere_point(const Vec3& v, const EquirectGrid& grid) {
  if (!(std::abs(norm(v) - 1.0) <= 1e-9)) throw ValidationError("sphere direction is not unit length");
  const double pi = std::numbers::pi;
  const double lat = std::asin(std::clamp(v.z, -1.0, 1.0));
  const double vv = (0.5 - lat / pi) * grid.height();
  if (v.x == 0.0 && v.y == 0.0) return {grid.width() / 2.0, vv};
  double lon = std::atan2(v.y, v.x);
  if (lon >= pi) lon -= 2.0 * pi;
  return {(lon / (2.0 * pi) + 0.5) * grid.width(), vv};
}

inline Vec3 unproject_sphere_point(const Point2& p, const EquirectGrid& grid) {
  const double pi = std::numbers::pi;
  const double lon = (p.x / grid.width() - 0.5) * 2.0 * pi;
  const double lat = (0.5 - p.y / grid.height()) * pi;
  return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

namespace detail {

// m directions along the shorter great-circle arc from a to b, at uniform
// angular steps. Both endpoints are reproduced exactly.
inline std::vector<Vec3> slerp_samples(const Vec3& a, const Vec3& b, std::size_t m) {
  require(m >= 2, "an arc needs at least two samples");
  require(std::abs(norm(a) - 1.0) <= 1e-9 && std::abs(norm(b) - 1.0) <= 1e-9,
          "arc endpoints must be unit vectors");
  const double omega = std::atan2(norm(cross(a, b)), dot(a, b));
  if (omega < 1e-12) throw DegenerateInputError("arc endpoints coincide");
  if (std::numbers::pi - omega < 1e-6) throw DegenerateInputError("arc endpoints are antipodal");
  const double s = std::sin(omega);
  std::vector<Vec3> out;
  out.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double t = static_cast<double>(j) / static_cast<double>(m - 1);
    out.push_back((std::sin((1.0 - t) * omega) / s) * a + (std::sin(t * omega) / s) * b);
  }
  out.front() = a;
  out.back() = b;
  return out;
}

}  // namespace detail

/// Image of the great-circle arc from a to b, split into separate polylines
/// wherever it crosses the +-pi longitude seam.
inline std::vector<Polyline> great_circle_segment(const Vec3& a, const Vec3& b, std::size_t m,
                                                  const EquirectGrid& grid) {
  std::vector<Polyline> pieces(1);
  for (const auto& dir : detail::slerp_samples(a, b, m)) {
    const Point2 p = project_sphere_point(dir, grid);
    if (!pieces.back().empty() && std::abs(p.x - pieces.back().back().x) > grid.width() / 2.0) {
      pieces.emplace_back();
    }
    pieces.back().push_back(p);
  }
  return pieces;
}

/// Same arc as one continuous polyline: u is shifted by multiples of the
/// width so that no consecutive pair jumps by more than half the width.
inline Polyline great_circle_unwrapped(const Vec3& a, const Vec3& b, std::size_t m,
                                       const EquirectGrid& grid) {
  Polyline out;
  out.reserve(m);
  for (const auto& dir : detail::slerp_samples(a, b, m)) {
    Point2 p = project_sphere_point(dir, grid);
    if (!out.empty()) {
      while (p.x - out.back().x > grid.width() / 2.0) p.x -= grid.width();
      while (out.back().x - p.x > grid.width() / 2.0) p.x += grid.width();
    }
    out.push_back(p);
  }
  return out;
}

struct ImageSize {
  double width = 0.0;
  double height = 0.0;
};

struct DistortedSegment {
  Polyline points;
  std::size_t visible = 0;
  // Spherical only: some points lie outside [0, width) after unwrapping.
  bool wrapped = false;

  bool fully_visible() const { return visible == points.size(); }
  bool fully_out_of_view() const { return visible == 0; }
};

/// Samples m uniform points on the straight segment a-b and maps each
/// through the camera. For spherical cameras a and b are equirect pixels and
/// the straight line between them is the great-circle arc they span.
inline DistortedSegment distort_segment(const Point2& a, const Point2& b, const CameraModel& cam,
                                        std::size_t m, std::optional<ImageSize> bounds = {}) {
  detail::require(m >= 2, "a segment needs at least two samples");
  DistortedSegment out;
  out.points.reserve(m);
  auto inside = [&](const Point2& p, bool wrap_x) {
    if (!bounds) return true;
    const bool x_ok = wrap_x || (p.x >= 0.0 && p.x <= bounds->width);
    return x_ok && p.y >= 0.0 && p.y <= bounds->height;
  };

  if (const auto* grid = std::get_if<EquirectGrid>(&cam)) {
    out.points = great_circle_unwrapped(unproject_sphere_point(a, *grid),
                                        unproject_sphere_point(b, *grid), m, *grid);
    for (const auto& p : out.points) {
      if (p.x < 0.0 || p.x >= grid->width()) out.wrapped = true;
      if (inside(p, true)) ++out.visible;
    }
    return out;
  }

  for (std::size_t j = 0; j < m; ++j) {
    const double t = static_cast<double>(j) / static_cast<double>(m - 1);
    const Point2 flat = j + 1 == m ? b : a + t * (b - a);
    if (const auto* intr = std::get_if<FisheyeIntrinsics>(&cam)) {
      const auto proj = fisheye_distort(flat, *intr);
      out.points.push_back(proj.point);
      if (proj.in_view && inside(proj.point, false)) ++out.visible;
    } else {
      out.points.push_back(flat);
      if (inside(flat, false)) ++out.visible;
    }
  }
  return out;
}

/// Maps a single pinhole point (a junction) through the camera. Spherical
/// points are already equirect pixels and pass through unchanged.
inline Projection distort_point(const Point2& p, const CameraModel& cam) {
  if (const auto* intr = std::get_if<FisheyeIntrinsics>(&cam)) return fisheye_distort(p, *intr);
  return {p, true};
}

}  // namespace ulsd
