#pragma once

// JSON documents: camera configs, annotation files, prediction files and
// dataset directories.
//
// Annotation file:
//   {"image": {"width": W, "height": H, "camera": {...}?},
//    "junctions": [[x, y], ...],
//    "lines": [{"order": n, "points": [[x, y] x (n+1)], "wrapped": true?}, ...]}
//
// Prediction file:
//   {"images": {"<name>": {"lines": [{"points": [[x, y], ...], "score": s}, ...],
//                          "junctions": [{"point": [x, y], "score": s}, ...]}}}
//
// Coordinates are written as 32-bit floats; objects keep their keys sorted,
// so a document written from equal values is byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ulsd/annotation.hpp"
#include "ulsd/camera.hpp"
#include "ulsd/error.hpp"
#include "ulsd/grid_codec.hpp"
#include "ulsd/metrics.hpp"
#include "ulsd/tensor_file.hpp"

namespace ulsd {

using Json = nlohmann::json;
// Number type float: values round-trip through text at 32-bit precision.
using FloatJson = nlohmann::basic_json<std::map, std::vector, std::string, bool, std::int64_t,
                                       std::uint64_t, float>;

namespace detail {

template <typename J>
double number(const J& j, const char* what) {
  if (!j.is_number()) throw ValidationError(std::string(what) + " must be a number");
  const double v = j.template get<double>();
  if (!std::isfinite(v)) throw ValidationError(std::string(what) + " must be finite");
  return v;
}

template <typename J>
const J& field(const J& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
  return j.at(key);
}

template <typename J>
Point2 point_from(const J& j) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("a point must be an [x, y] pair");
  return {number(j[0], "x"), number(j[1], "y")};
}

template <typename J>
Polyline points_from(const J& j) {
  if (!j.is_array()) throw ValidationError("expected an array of points");
  Polyline out;
  out.reserve(j.size());
  for (const auto& p : j) out.push_back(point_from(p));
  return out;
}

inline FloatJson point_to(const Point2& p) {
  return FloatJson::array({static_cast<float>(p.x), static_cast<float>(p.y)});
}

inline FloatJson points_to(const Polyline& pts) {
  FloatJson a = FloatJson::array();
  for (const auto& p : pts) a.push_back(point_to(p));
  return a;
}

template <typename J>
std::size_t dimension(const J& j, const char* what) {
  const double v = number(j, what);
  if (!(v > 0.0) || v != std::floor(v)) throw ValidationError(std::string(what) + " must be a positive integer");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

template <typename J>
CameraModel camera_from_json(const J& j) {
  using detail::field;
  using detail::number;
  const auto& type_j = field(j, "type");
  if (!type_j.is_string()) throw ValidationError("camera type must be a string");
  const auto type = type_j.template get<std::string>();
  if (type == "pinhole") {
    return PinholeCamera{number(field(j, "fx"), "fx"), number(field(j, "fy"), "fy"), number(field(j, "cx"), "cx"),
                         number(field(j, "cy"), "cy")};
  }
  if (type == "fisheye") {
    const auto& k = field(j, "k");
    if (!k.is_array() || k.size() > 4) throw ValidationError("fisheye 'k' must hold up to four coefficients");
    std::array<double, 4> coeffs{};
    for (std::size_t i = 0; i < k.size(); ++i) coeffs[i] = number(k[i], "k");
    const double theta_max = j.contains("theta_max") ? number(j.at("theta_max"), "theta_max")
                                                     : FisheyeIntrinsics::kDefaultThetaMax;
    return FisheyeIntrinsics(number(field(j, "fx"), "fx"), number(field(j, "fy"), "fy"),
                             number(field(j, "cx"), "cx"), number(field(j, "cy"), "cy"), coeffs, theta_max);
  }
  if (type == "spherical") {
    return EquirectGrid(number(field(j, "width"), "width"), number(field(j, "height"), "height"));
  }
  throw ValidationError("unknown camera type '" + type + "'");
}

template <typename J = FloatJson>
J camera_to_json(const CameraModel& cam) {
  J j;
  j["type"] = camera_type_name(cam);
  if (const auto* p = std::get_if<PinholeCamera>(&cam)) {
    j["fx"] = p->fx;
    j["fy"] = p->fy;
    j["cx"] = p->cx;
    j["cy"] = p->cy;
  } else if (const auto* f = std::get_if<FisheyeIntrinsics>(&cam)) {
    j["fx"] = f->fx();
    j["fy"] = f->fy();
    j["cx"] = f->cx();
    j["cy"] = f->cy();
    j["k"] = J::array({f->k()[0], f->k()[1], f->k()[2], f->k()[3]});
    if (f->theta_max() != FisheyeIntrinsics::kDefaultThetaMax) j["theta_max"] = f->theta_max();
  } else {
    const auto& g = std::get<EquirectGrid>(cam);
    j["width"] = g.width();
    j["height"] = g.height();
  }
  return j;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename J = Json>
J parse_json(const std::string& text, const std::string& origin) {
  try {
    return J::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed JSON in " + origin + ": " + e.what());
  }
}

inline CameraModel read_camera(const std::filesystem::path& path) {
  return camera_from_json(parse_json<Json>(read_text(path), path.string()));
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_bytes_atomic(path, text.data(), text.size());
}

template <typename J>
std::string dump(const J& j) {
  return j.dump(2) + "\n";
}

// --- annotations -------------------------------------------------------------

inline Annotation annotation_from_json(const FloatJson& j) {
  using detail::field;
  Annotation a;
  const auto& image = field(j, "image");
  a.image = {static_cast<double>(detail::dimension(field(image, "width"), "width")),
             static_cast<double>(detail::dimension(field(image, "height"), "height"))};
  if (image.contains("camera")) a.camera = camera_from_json(image.at("camera"));
  if (j.contains("junctions")) a.junctions = detail::points_from(j.at("junctions"));
  if (j.contains("lines")) {
    const auto& lines = j.at("lines");
    if (!lines.is_array()) throw ValidationError("'lines' must be an array");
    for (const auto& l : lines) {
      const auto order = detail::dimension(field(l, "order"), "order");
      auto pts = detail::points_from(field(l, "points"));
      if (pts.size() != order + 1) {
        throw ValidationError("line of order " + std::to_string(order) + " has " + std::to_string(pts.size()) +
                              " points");
      }
      bool wrapped = false;
      if (l.contains("wrapped")) {
        if (!l.at("wrapped").is_boolean()) throw ValidationError("'wrapped' must be a boolean");
        wrapped = l.at("wrapped").template get<bool>();
      }
      a.lines.push_back({EquipartitionLine(std::move(pts)), wrapped});
    }
  }
  return a;
}

inline FloatJson annotation_to_json(const Annotation& a) {
  FloatJson j;
  j["image"]["width"] = static_cast<std::int64_t>(a.image.width);
  j["image"]["height"] = static_cast<std::int64_t>(a.image.height);
  if (a.camera) j["image"]["camera"] = camera_to_json(*a.camera);
  j["junctions"] = detail::points_to(a.junctions);
  j["lines"] = FloatJson::array();
  for (const auto& l : a.lines) {
    FloatJson lj;
    lj["order"] = static_cast<std::int64_t>(l.points.order());
    lj["points"] = detail::points_to(l.points.points());
    if (l.wrapped) lj["wrapped"] = true;
    j["lines"].push_back(std::move(lj));
  }
  return j;
}

inline Annotation read_annotation(const std::filesystem::path& path) {
  return annotation_from_json(parse_json<FloatJson>(read_text(path), path.string()));
}

inline void write_annotation(const std::filesystem::path& path, const Annotation& a) {
  write_text_atomic(path, dump(annotation_to_json(a)));
}

// --- datasets ----------------------------------------------------------------

inline constexpr const char* kManifestName = "manifest.json";

/// Image names of a dataset directory: the "images" list of manifest.json
/// when present, otherwise every *.json file stem in sorted order.
inline std::vector<std::string> dataset_names(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError(dir.string() + " is not a directory");
  const auto manifest = dir / kManifestName;
  std::vector<std::string> names;
  if (std::filesystem::exists(manifest)) {
    const auto j = parse_json<Json>(read_text(manifest), manifest.string());
    const auto& images = detail::field(j, "images");
    if (!images.is_array()) throw ValidationError("manifest 'images' must be an array");
    for (const auto& n : images) {
      if (!n.is_string()) throw ValidationError("manifest image names must be strings");
      names.push_back(n.get<std::string>());
    }
    return names;
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (p.extension() == ".json" && p.filename() != kManifestName) names.push_back(p.stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

inline void write_manifest(const std::filesystem::path& dir, const std::vector<std::string>& names,
                           Json extra = Json::object()) {
  extra["images"] = names;
  write_text_atomic(dir / kManifestName, dump(extra));
}

inline std::vector<std::pair<std::string, Annotation>> read_dataset(const std::filesystem::path& dir) {
  std::vector<std::pair<std::string, Annotation>> out;
  for (const auto& name : dataset_names(dir)) out.emplace_back(name, read_annotation(dir / (name + ".json")));
  return out;
}

// --- predictions -------------------------------------------------------------

using NamedPredictions = std::map<std::string, ImagePrediction>;

inline NamedPredictions predictions_from_json(const FloatJson& j) {
  NamedPredictions out;
  const auto& images = detail::field(j, "images");
  if (!images.is_object()) throw ValidationError("'images' must be an object keyed by image name");
  for (const auto& [name, img] : images.items()) {
    ImagePrediction p;
    if (img.contains("lines")) {
      for (const auto& l : img.at("lines")) {
        p.lines.push_back({EquipartitionLine(detail::points_from(detail::field(l, "points"))),
                           detail::number(detail::field(l, "score"), "score")});
      }
    }
    if (img.contains("junctions")) {
      for (const auto& jn : img.at("junctions")) {
        p.junctions.push_back({detail::point_from(detail::field(jn, "point")),
                               detail::number(detail::field(jn, "score"), "score")});
      }
    }
    out.emplace(name, std::move(p));
  }
  return out;
}

inline FloatJson predictions_to_json(const NamedPredictions& preds) {
  FloatJson j;
  j["images"] = FloatJson::object();
  for (const auto& [name, p] : preds) {
    FloatJson img;
    img["lines"] = FloatJson::array();
    for (const auto& l : p.lines) {
      img["lines"].push_back({{"points", detail::points_to(l.points.points())},
                              {"score", static_cast<float>(l.confidence)}});
    }
    img["junctions"] = FloatJson::array();
    for (const auto& jn : p.junctions) {
      img["junctions"].push_back({{"point", detail::point_to(jn.position)},
                                  {"score", static_cast<float>(jn.confidence)}});
    }
    j["images"][name] = std::move(img);
  }
  return j;
}

inline NamedPredictions read_predictions(const std::filesystem::path& path) {
  return predictions_from_json(parse_json<FloatJson>(read_text(path), path.string()));
}

inline void write_predictions(const std::filesystem::path& path, const NamedPredictions& preds) {
  write_text_atomic(path, dump(predictions_to_json(preds)));
}

// --- grid maps ---------------------------------------------------------------

// Channel layout of a packed map tensor [6 + 2m, H_b, W_b]:
//   0      junction confidence
//   1, 2   junction offset x, y (bin units)
//   3      line center confidence
//   4, 5   line center offset x, y (bin units)
//   6...   line equipartition offsets, x/y interleaved per stored point (pixels)
inline constexpr std::size_t kPackedFixedChannels = 6;

inline Tensor pack_maps(const JunctionMaps& j, const LineMaps& l) {
  detail::require(j.confidence.height() == l.confidence.height() && j.confidence.width() == l.confidence.width(),
                  "junction and line maps differ in size");
  const std::size_t h = j.confidence.height();
  const std::size_t w = j.confidence.width();
  const std::size_t channels = kPackedFixedChannels + l.eq_offsets.channels();
  Tensor t{{channels, h, w}, {}};
  t.data.reserve(channels * h * w);
  for (const auto* p : {&j.confidence, &j.offsets, &l.confidence, &l.center_offsets, &l.eq_offsets}) {
    for (double v : p->data()) t.data.push_back(static_cast<float>(v));
  }
  return t;
}

inline std::pair<JunctionMaps, LineMaps> unpack_maps(const Tensor& t, std::size_t order) {
  detail::require(t.dims.size() == 3, "packed maps must be a 3-D tensor");
  const std::size_t expected = kPackedFixedChannels + 2 * stored_offset_count(order);
  detail::require(t.dims[0] == expected, "packed maps have " + std::to_string(t.dims[0]) +
                                             " channels, order " + std::to_string(order) + " needs " +
                                             std::to_string(expected));
  const std::size_t h = t.dims[1];
  const std::size_t w = t.dims[2];
  const std::size_t plane = h * w;
  auto slice = [&](std::size_t first, std::size_t count) {
    return Planes<double>(count, h, w,
                          std::vector<double>(t.data.begin() + static_cast<std::ptrdiff_t>(first * plane),
                                              t.data.begin() + static_cast<std::ptrdiff_t>((first + count) * plane)));
  };
  JunctionMaps j{slice(0, 1), slice(1, 2)};
  LineMaps l{order, slice(3, 1), slice(4, 2), slice(6, expected - kPackedFixedChannels)};
  return {std::move(j), std::move(l)};
}

}  // namespace ulsd
