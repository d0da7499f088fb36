#pragma once

#include <optional>
#include <vector>

#include "ulsd/bezier.hpp"
#include "ulsd/camera.hpp"
#include "ulsd/geometry.hpp"

namespace ulsd {

struct AnnotatedLine {
  EquipartitionLine points;
  // Spherical lines crossing the longitude seam are stored unwrapped, so
  // some u coordinates fall outside [0, width).
  bool wrapped = false;
};

/// Ground truth for one image.
struct Annotation {
  ImageSize image;
  std::optional<CameraModel> camera;
  Polyline junctions;
  std::vector<AnnotatedLine> lines;
};

}  // namespace ulsd
