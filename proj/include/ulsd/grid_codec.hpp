#pragma once

// Ground-truth grid maps. Junctions and line centers are binned onto an
// H_b x W_b grid; each occupied bin carries a confidence of 1 and an offset
// that recovers the exact sub-bin position. Lines additionally carry the
// offsets from their center to their equipartition points.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ulsd/bezier.hpp"
#include "ulsd/error.hpp"
#include "ulsd/geometry.hpp"
#include "ulsd/planes.hpp"

namespace ulsd {

class GridSpec {
 public:
  GridSpec(std::size_t image_w, std::size_t image_h, std::size_t grid_w, std::size_t grid_h)
      : image_w_(image_w), image_h_(image_h), grid_w_(grid_w), grid_h_(grid_h) {
    detail::require(image_w > 0 && image_h > 0 && grid_w > 0 && grid_h > 0,
                    "grid and image dimensions must be positive");
    detail::require(image_w % grid_w == 0 && image_h % grid_h == 0,
                    "image " + std::to_string(image_w) + "x" + std::to_string(image_h) +
                        " is not divisible by grid " + std::to_string(grid_w) + "x" +
                        std::to_string(grid_h));
  }

  std::size_t image_w() const { return image_w_; }
  std::size_t image_h() const { return image_h_; }
  std::size_t grid_w() const { return grid_w_; }
  std::size_t grid_h() const { return grid_h_; }
  double scale_x() const { return static_cast<double>(image_w_) / static_cast<double>(grid_w_); }
  double scale_y() const { return static_cast<double>(image_h_) / static_cast<double>(grid_h_); }

  bool contains(const Point2& p) const {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= static_cast<double>(image_w_) &&
           p.y <= static_cast<double>(image_h_);
  }

  /// (row, col) of the bin containing p. Points on the right or bottom image
  /// border belong to the last bin.
  std::pair<std::size_t, std::size_t> bin_of(const Point2& p) const {
    if (!contains(p)) throw ValidationError("point lies outside the image");
    const auto col = std::min(static_cast<std::size_t>(p.x / scale_x()), grid_w_ - 1);
    const auto row = std::min(static_cast<std::size_t>(p.y / scale_y()), grid_h_ - 1);
    return {row, col};
  }

  Point2 bin_center(std::size_t row, std::size_t col) const {
    return {(static_cast<double>(col) + 0.5) * scale_x(), (static_cast<double>(row) + 0.5) * scale_y()};
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  std::size_t image_w_, image_h_, grid_w_, grid_h_;
};

inline constexpr std::size_t kDefaultNmsWindow = 3;
inline constexpr std::size_t kDefaultTopK = 300;
inline constexpr double kDefaultMinConfidence = 0.008;

/// Junction confidence (1 channel) and offset (2 channels: x, y) maps.
/// Offsets are (bin_center - p) / bin_size, i.e. in bin units.
struct JunctionMaps {
  Planes<double> confidence;
  Planes<double> offsets;
};

/// Number of stored center-to-point offset vectors for a line of order n:
/// n when n is even (the center is itself an equipartition point), else n+1.
inline std::size_t stored_offset_count(std::size_t order) {
  return order % 2 == 0 ? order : order + 1;
}

/// Equipartition indices whose offsets are stored, in channel order.
inline std::vector<std::size_t> stored_offset_indices(std::size_t order) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k <= order; ++k) {
    if (order % 2 == 0 && k == order / 2) continue;
    idx.push_back(k);
  }
  return idx;
}

/// Line center confidence (1 channel), center sub-bin offset (2 channels, bin
/// units, same convention as junctions) and equipartition offsets
/// (2m channels, pixels, point minus center).
struct LineMaps {
  std::size_t order = 1;
  Planes<double> confidence;
  Planes<double> center_offsets;
  Planes<double> eq_offsets;
};

struct Junction {
  Point2 position;
  double confidence = 1.0;
};

struct LineProposal {
  EquipartitionLine points;
  double confidence = 1.0;
};

template <typename Maps>
struct Encoded {
  Maps maps;
  std::size_t collisions = 0;
};

inline JunctionMaps empty_junction_maps(const GridSpec& spec) {
  return {Planes<double>(1, spec.grid_h(), spec.grid_w()), Planes<double>(2, spec.grid_h(), spec.grid_w())};
}

inline LineMaps empty_line_maps(const GridSpec& spec, std::size_t order) {
  detail::require_order(order);
  return {order, Planes<double>(1, spec.grid_h(), spec.grid_w()),
          Planes<double>(2, spec.grid_h(), spec.grid_w()),
          Planes<double>(2 * stored_offset_count(order), spec.grid_h(), spec.grid_w())};
}

/// Bins each junction; the first junction in input order owns a bin and
/// later ones landing in the same bin are counted as collisions.
inline Encoded<JunctionMaps> encode_junctions(std::span<const Point2> junctions, const GridSpec& spec) {
  Encoded<JunctionMaps> out{empty_junction_maps(spec), 0};
  auto& m = out.maps;
  for (const auto& p : junctions) {
    const auto [row, col] = spec.bin_of(p);
    if (m.confidence(0, row, col) != 0.0) {
      ++out.collisions;
      continue;
    }
    const Point2 c = spec.bin_center(row, col);
    m.confidence(0, row, col) = 1.0;
    m.offsets(0, row, col) = (c.x - p.x) / spec.scale_x();
    m.offsets(1, row, col) = (c.y - p.y) / spec.scale_y();
  }
  return out;
}

/// Curve point at t = 0.5. For even orders this is the middle equipartition
/// point itself.
inline Point2 line_center(const EquipartitionLine& line) {
  const std::size_t n = line.order();
  if (n % 2 == 0) return line[n / 2];
  if (n == 1) return 0.5 * (line.front() + line.back());
  return evaluate(from_equipartition(line), 0.5);
}

struct LineEncodeOptions {
  // Spherical panoramas: a center left of 0 or right of the width is
  // wrapped horizontally before binning.
  bool wrap_horizontal = false;
};

inline Encoded<LineMaps> encode_lines(std::span<const EquipartitionLine> lines, const GridSpec& spec,
                                      std::size_t order, const LineEncodeOptions& options = {}) {
  Encoded<LineMaps> out{empty_line_maps(spec, order), 0};
  auto& m = out.maps;
  const auto indices = stored_offset_indices(order);
  const double width = static_cast<double>(spec.image_w());
  for (const auto& line : lines) {
    if (line.order() != order) {
      throw ValidationError("line of order " + std::to_string(line.order()) +
                            " in an order-" + std::to_string(order) + " encoding");
    }
    Point2 center = line_center(line);
    double shift = 0.0;
    if (options.wrap_horizontal) {
      while (center.x + shift < 0.0) shift += width;
      while (center.x + shift >= width) shift -= width;
    }
    const Point2 binned{center.x + shift, center.y};
    const auto [row, col] = spec.bin_of(binned);
    if (m.confidence(0, row, col) != 0.0) {
      ++out.collisions;
      continue;
    }
    const Point2 c = spec.bin_center(row, col);
    m.confidence(0, row, col) = 1.0;
    m.center_offsets(0, row, col) = (c.x - binned.x) / spec.scale_x();
    m.center_offsets(1, row, col) = (c.y - binned.y) / spec.scale_y();
    for (std::size_t j = 0; j < indices.size(); ++j) {
      const Point2 d = line[indices[j]] - center;
      m.eq_offsets(2 * j, row, col) = d.x;
      m.eq_offsets(2 * j + 1, row, col) = d.y;
    }
  }
  return out;
}

/// Keeps a value only where it is the maximum of its window. Among equal
/// maxima the lexicographically smallest (row, col) survives. A window of 1
/// suppresses nothing.
inline Planes<double> nms(const Planes<double>& confidence, std::size_t window = kDefaultNmsWindow) {
  detail::require(window % 2 == 1, "NMS window must be odd");
  detail::require(confidence.channels() == 1, "NMS expects a single-channel map");
  const std::size_t h = confidence.height();
  const std::size_t w = confidence.width();
  const std::size_t r = window / 2;
  Planes<double> out(1, h, w);
  for (std::size_t row = 0; row < h; ++row) {
    for (std::size_t col = 0; col < w; ++col) {
      const double v = confidence(0, row, col);
      bool keep = true;
      const std::size_t r0 = row >= r ? row - r : 0;
      const std::size_t c0 = col >= r ? col - r : 0;
      const std::size_t r1 = std::min(h - 1, row + r);
      const std::size_t c1 = std::min(w - 1, col + r);
      for (std::size_t rr = r0; rr <= r1 && keep; ++rr) {
        for (std::size_t cc = c0; cc <= c1; ++cc) {
          const double u = confidence(0, rr, cc);
          const bool earlier = rr < row || (rr == row && cc < col);
          if (u > v || (earlier && u == v)) {
            keep = false;
            break;
          }
        }
      }
      if (keep) out(0, row, col) = v;
    }
  }
  return out;
}

struct DecodeOptions {
  std::size_t top_k = kDefaultTopK;
  double min_confidence = kDefaultMinConfidence;
  std::size_t nms_window = kDefaultNmsWindow;
  // Clamp reconstructed positions into the image rectangle.
  bool clamp = true;
};

namespace detail {

struct Peak {
  std::size_t row;
  std::size_t col;
  double confidence;
};

inline std::vector<Peak> top_peaks(const Planes<double>& confidence, const DecodeOptions& options) {
  require(options.top_k >= 1, "top-K must be at least 1");
  const auto suppressed = nms(confidence, options.nms_window);
  std::vector<Peak> peaks;
  for (std::size_t row = 0; row < suppressed.height(); ++row) {
    for (std::size_t col = 0; col < suppressed.width(); ++col) {
      const double v = suppressed(0, row, col);
      if (v > options.min_confidence) peaks.push_back({row, col, v});
    }
  }
  // Row-major scan order already breaks ties; stable sort keeps it.
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.confidence > b.confidence; });
  if (peaks.size() > options.top_k) peaks.resize(options.top_k);
  return peaks;
}

inline Point2 clamp_to(const GridSpec& spec, Point2 p) {
  p.x = std::clamp(p.x, 0.0, static_cast<double>(spec.image_w()));
  p.y = std::clamp(p.y, 0.0, static_cast<double>(spec.image_h()));
  return p;
}

inline Point2 sub_bin_position(const GridSpec& spec, const Planes<double>& offsets, const Peak& peak) {
  const Point2 c = spec.bin_center(peak.row, peak.col);
  return {c.x - offsets(0, peak.row, peak.col) * spec.scale_x(),
          c.y - offsets(1, peak.row, peak.col) * spec.scale_y()};
}

inline void require_grid(const Planes<double>& p, const GridSpec& spec, std::size_t channels,
                         const char* what) {
  require(p.channels() == channels && p.height() == spec.grid_h() && p.width() == spec.grid_w(),
          std::string(what) + " map shape does not match the grid spec");
}

}  // namespace detail

inline std::vector<Junction> decode_junctions(const JunctionMaps& maps, const GridSpec& spec,
                                              const DecodeOptions& options = {}) {
  detail::require_grid(maps.confidence, spec, 1, "junction confidence");
  detail::require_grid(maps.offsets, spec, 2, "junction offset");
  std::vector<Junction> out;
  for (const auto& peak : detail::top_peaks(maps.confidence, options)) {
    Point2 p = detail::sub_bin_position(spec, maps.offsets, peak);
    if (options.clamp) p = detail::clamp_to(spec, p);
    out.push_back({p, peak.confidence});
  }
  return out;
}

inline std::vector<LineProposal> decode_lines(const LineMaps& maps, const GridSpec& spec,
                                              const DecodeOptions& options = {}) {
  const std::size_t n = maps.order;
  detail::require_order(n);
  detail::require_grid(maps.confidence, spec, 1, "line confidence");
  detail::require_grid(maps.center_offsets, spec, 2, "line center offset");
  detail::require_grid(maps.eq_offsets, spec, 2 * stored_offset_count(n), "line offset");
  const auto indices = stored_offset_indices(n);
  std::vector<LineProposal> out;
  for (const auto& peak : detail::top_peaks(maps.confidence, options)) {
    const Point2 center = detail::sub_bin_position(spec, maps.center_offsets, peak);
    Polyline pts(n + 1);
    if (n % 2 == 0) pts[n / 2] = center;
    for (std::size_t j = 0; j < indices.size(); ++j) {
      pts[indices[j]] = center + Point2{maps.eq_offsets(2 * j, peak.row, peak.col),
                                        maps.eq_offsets(2 * j + 1, peak.row, peak.col)};
    }
    if (options.clamp) {
      for (auto& p : pts) p = detail::clamp_to(spec, p);
    }
    out.push_back({EquipartitionLine(std::move(pts)), peak.confidence});
  }
  return out;
}

}  // namespace ulsd
