#pragma once

// Distorted dataset synthesis: straight pinhole annotations are pushed
// through a camera model and re-fitted as Bezier curves.

#include <algorithm>
#include <cstddef>

#include "ulsd/annotation.hpp"
#include "ulsd/bezier.hpp"
#include "ulsd/camera.hpp"

namespace ulsd {

inline constexpr std::size_t kDefaultDistortionSamples = 64;

struct SynthOptions {
  std::size_t order = 2;
  std::size_t samples = kDefaultDistortionSamples;
  FitOptions fit;
};

struct SynthResult {
  Annotation annotation;
  std::size_t dropped_lines = 0;       // no sample inside the view
  std::size_t degenerate_lines = 0;    // zero-length or antipodal input
  std::size_t partially_visible = 0;   // kept, some samples outside the view
  std::size_t dropped_junctions = 0;
  double max_fit_error = 0.0;          // worst per-line mean fit error, pixels
};

inline SynthResult synth_annotation(const Annotation& input, const CameraModel& cam,
                                    const SynthOptions& options = {}) {
  detail::require_order(options.order);
  detail::require(options.samples >= options.order + 1, "too few distortion samples for the order");

  SynthResult result;
  Annotation& out = result.annotation;
  out.image = input.image;
  out.camera = cam;
  const ImageSize bounds = input.image;
  if (const auto* grid = std::get_if<EquirectGrid>(&cam)) {
    detail::require(grid->width() == bounds.width && grid->height() == bounds.height,
                    "annotation size does not match the equirect camera");
  }

  for (const auto& j : input.junctions) {
    const auto proj = distort_point(j, cam);
    const bool inside = proj.point.x >= 0.0 && proj.point.x <= bounds.width &&
                        proj.point.y >= 0.0 && proj.point.y <= bounds.height;
    if (proj.in_view && inside) {
      out.junctions.push_back(proj.point);
    } else {
      ++result.dropped_junctions;
    }
  }

  for (const auto& line : input.lines) {
    detail::require(line.points.order() == 1, "synthesis expects straight (order-1) input lines");
    DistortedSegment seg{};
    try {
      seg = distort_segment(line.points.front(), line.points.back(), cam, options.samples, bounds);
    } catch (const DegenerateInputError&) {
      ++result.degenerate_lines;
      continue;
    }
    if (seg.fully_out_of_view()) {
      ++result.dropped_lines;
      continue;
    }
    if (!seg.fully_visible()) ++result.partially_visible;
    try {
      const auto fit = fit_polyline(seg.points, options.order, options.fit);
      result.max_fit_error = std::max(result.max_fit_error, fit.report.mean_error);
      out.lines.push_back({to_equipartition(fit.curve), seg.wrapped});
    } catch (const DegenerateInputError&) {
      ++result.degenerate_lines;
    }
  }
  return result;
}

}  // namespace ulsd
