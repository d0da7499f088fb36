#pragma once

// Fitting error of Bezier curves of increasing order on synthetic distorted
// line segments, for a fisheye camera and for an equirectangular panorama.
//
// Fisheye: straight segments of random length and orientation lying inside
// a pinhole image are distorted point by point.
// Spherical: axis-aligned 3D segments on the walls, floor and ceiling of a
// box room around the camera are projected as great-circle arcs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "ulsd/bezier.hpp"
#include "ulsd/camera.hpp"

namespace ulsd {

struct FittingSweepOptions {
  std::size_t segments = 1000;
  std::uint64_t seed = 0;
  std::size_t samples = 64;
  FitOptions fit;

  // Pinhole source image and fisheye camera.
  double image_size = 512.0;
  double min_length = 16.0;
  double max_length = 256.0;
  FisheyeIntrinsics fisheye{256.0, 256.0, 256.0, 256.0, {0.02, -0.005, 0.001, 0.0}};

  // Equirect panorama and the room box around the camera, in meters.
  double pano_height = 512.0;
  std::array<double, 3> room_half_extent{3.0, 2.5, 1.5};
  double min_length_m = 0.3;
  double max_length_m = 2.0;
};

struct OrderStats {
  std::size_t order = 0;
  double mean_error = 0.0;  // mean over segments of the per-segment mean error
  double max_error = 0.0;   // worst per-segment mean error
};

struct FittingSweepResult {
  std::vector<OrderStats> fisheye;
  std::vector<OrderStats> spherical;
};

namespace detail {

inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline Polyline random_fisheye_segment(const FittingSweepOptions& o, std::mt19937_64& rng) {
  for (;;) {
    const Point2 a{o.image_size * unit_uniform(rng), o.image_size * unit_uniform(rng)};
    const double len = o.min_length + (o.max_length - o.min_length) * unit_uniform(rng);
    const double angle = 2.0 * std::numbers::pi * unit_uniform(rng);
    const Point2 b = a + Point2{len * std::cos(angle), len * std::sin(angle)};
    if (b.x < 0.0 || b.y < 0.0 || b.x > o.image_size || b.y > o.image_size) continue;
    return distort_segment(a, b, o.fisheye, o.samples).points;
  }
}

inline Polyline random_room_arc(const FittingSweepOptions& o, const EquirectGrid& grid, std::mt19937_64& rng) {
  const auto& ext = o.room_half_extent;
  for (;;) {
    const auto face = static_cast<int>(rng() % 6);
    const int fixed_axis = face / 2;
    std::array<double, 3> p{};
    for (int k = 0; k < 3; ++k) p[k] = ext[k] * (2.0 * unit_uniform(rng) - 1.0);
    p[fixed_axis] = face % 2 == 0 ? ext[fixed_axis] : -ext[fixed_axis];
    const int along = (fixed_axis + 1 + static_cast<int>(rng() % 2)) % 3;
    const double len = o.min_length_m + (o.max_length_m - o.min_length_m) * unit_uniform(rng);
    std::array<double, 3> q = p;
    q[along] += len;
    if (q[along] > ext[along]) continue;
    const Vec3 a = normalized({p[0], p[1], p[2]});
    const Vec3 b = normalized({q[0], q[1], q[2]});
    return great_circle_unwrapped(a, b, o.samples, grid);
  }
}

inline std::vector<OrderStats> sweep_orders(const std::vector<Polyline>& polylines, const FitOptions& fit) {
  std::vector<OrderStats> out;
  for (std::size_t n = kMinOrder; n <= kMaxOrder; ++n) {
    OrderStats s{n, 0.0, 0.0};
    for (const auto& pl : polylines) {
      const double e = fit_polyline(pl, n, fit).report.mean_error;
      s.mean_error += e;
      s.max_error = std::max(s.max_error, e);
    }
    s.mean_error /= static_cast<double>(polylines.size());
    out.push_back(s);
  }
  return out;
}

}  // namespace detail

inline FittingSweepResult run_fitting_sweep(const FittingSweepOptions& options = {}) {
  detail::require(options.segments >= 1, "the sweep needs at least one segment");
  detail::require(options.samples >= kMaxOrder + 1, "too few samples per segment");
  std::mt19937_64 rng(options.seed);
  const EquirectGrid grid(2.0 * options.pano_height, options.pano_height);
  std::vector<Polyline> fisheye, spherical;
  fisheye.reserve(options.segments);
  spherical.reserve(options.segments);
  for (std::size_t i = 0; i < options.segments; ++i) {
    fisheye.push_back(detail::random_fisheye_segment(options, rng));
    spherical.push_back(detail::random_room_arc(options, grid, rng));
  }
  return {detail::sweep_orders(fisheye, options.fit), detail::sweep_orders(spherical, options.fit)};
}

}  // namespace ulsd
