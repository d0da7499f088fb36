#pragma once

// Fixed-length features for curved lines: sample the Bezier curve
// uniformly, read the feature map bilinearly at each sample, then max-pool
// along the curve.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "ulsd/bezier.hpp"
#include "ulsd/error.hpp"
#include "ulsd/planes.hpp"

namespace ulsd {

using FeatureMap = Planes<float>;

inline constexpr std::size_t kDefaultAlignPoints = 32;
inline constexpr std::size_t kDefaultAlignPool = 4;

/// Bilinear read of every channel at grid coordinates p (x = column,
/// y = row). Coordinates outside the map are clamped to the border.
inline std::vector<double> bilinear_sample(const FeatureMap& map, const Point2& p) {
  detail::require(map.channels() > 0 && map.height() > 0 && map.width() > 0, "empty feature map");
  const double x = std::clamp(p.x, 0.0, static_cast<double>(map.width() - 1));
  const double y = std::clamp(p.y, 0.0, static_cast<double>(map.height() - 1));
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x1 = std::min(x0 + 1, map.width() - 1);
  const std::size_t y1 = std::min(y0 + 1, map.height() - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  std::vector<double> out(map.channels());
  for (std::size_t c = 0; c < map.channels(); ++c) {
    const double top = (1.0 - fx) * map(c, y0, x0) + fx * map(c, y0, x1);
    const double bottom = (1.0 - fx) * map(c, y1, x0) + fx * map(c, y1, x1);
    out[c] = (1.0 - fy) * top + fy * bottom;
  }
  return out;
}

struct AlignOptions {
  std::size_t n_points = kDefaultAlignPoints;
  std::size_t pool = kDefaultAlignPool;
  // Image pixels per grid cell. Image (x, y) reads grid
  // (x / scale_x - 0.5, y / scale_y - 0.5).
  double scale_x = 1.0;
  double scale_y = 1.0;
};

inline Point2 image_to_grid(const Point2& p, double scale_x, double scale_y) {
  return {p.x / scale_x - 0.5, p.y / scale_y - 0.5};
}

/// Feature of length C * n_points / pool, channel-major: all pooled values of
/// channel 0 first, then channel 1, and so on.
inline std::vector<double> bezier_align(const FeatureMap& map, const EquipartitionLine& line,
                                        const AlignOptions& options = {}) {
  detail::require(options.n_points >= 2, "BezierAlign needs at least two sample points");
  detail::require(options.pool >= 1 && options.n_points % options.pool == 0,
                  "sample count must be divisible by the pooling window");
  detail::require(options.scale_x > 0.0 && options.scale_y > 0.0, "grid scale must be positive");
  const BezierSegment curve = from_equipartition(line);
  const std::size_t windows = options.n_points / options.pool;
  const std::size_t channels = map.channels();

  std::vector<double> out(channels * windows, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < options.n_points; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(options.n_points - 1);
    const auto grid_p = image_to_grid(evaluate(curve, t), options.scale_x, options.scale_y);
    const auto values = bilinear_sample(map, grid_p);
    const std::size_t w = k / options.pool;
    for (std::size_t c = 0; c < channels; ++c) {
      out[c * windows + w] = std::max(out[c * windows + w], values[c]);
    }
  }
  return out;
}

}  // namespace ulsd
