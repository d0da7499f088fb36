#pragma once

// Structural average precision for equipartition lines, junction AP, and
// precision-recall curves.
//
// Coordinates are rescaled so that each image's longer side is `scale_to`
// (128 by default) before any distance is measured. Predictions from all
// images are swept once in descending confidence order (ties keep input
// order); each one is a true positive if an unmatched ground-truth item in
// its image lies within the threshold, and the closest such item is then
// consumed. AP is the area under the all-points interpolated PR curve.

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ulsd/bezier.hpp"
#include "ulsd/camera.hpp"
#include "ulsd/error.hpp"
#include "ulsd/grid_codec.hpp"
#include "ulsd/proposal.hpp"

namespace ulsd {

inline constexpr std::array<double, 3> kSapThresholds{5.0, 10.0, 15.0};
inline constexpr std::array<double, 3> kJunctionThresholds{0.5, 1.0, 2.0};
inline constexpr double kDefaultEvalScale = 128.0;

struct ImagePrediction {
  std::vector<LineProposal> lines;
  std::vector<Junction> junctions;
};

struct ImageGroundTruth {
  ImageSize image;
  std::vector<EquipartitionLine> lines;
  Polyline junctions;
};

using PredictionSet = std::vector<ImagePrediction>;
using GroundTruthSet = std::vector<ImageGroundTruth>;

struct EvalOptions {
  double scale_to = kDefaultEvalScale;
  // Spherical panoramas: a prediction may also match after shifting all of
  // its points by +-width.
  bool wrap_horizontal = false;
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct ApCurve {
  double ap = 0.0;
  std::vector<PrPoint> pr;
};

/// Cumulative (recall, precision) after each prediction. With no ground
/// truth, recall is reported as 0.
inline std::vector<PrPoint> pr_points(const std::vector<bool>& tp_flags, std::size_t total_gt) {
  std::vector<PrPoint> out;
  out.reserve(tp_flags.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < tp_flags.size(); ++i) {
    if (tp_flags[i]) ++tp;
    const double precision = static_cast<double>(tp) / static_cast<double>(i + 1);
    const double recall = total_gt == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(total_gt);
    out.push_back({recall, precision});
  }
  return out;
}

/// Area under the precision envelope: sum over i of
/// (r_i - r_{i-1}) * max_{j >= i} p_j, with r_{-1} = 0.
inline double average_precision(std::span<const PrPoint> pr) {
  std::vector<double> envelope(pr.size());
  double running = 0.0;
  for (std::size_t i = pr.size(); i-- > 0;) {
    running = std::max(running, pr[i].precision);
    envelope[i] = running;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < pr.size(); ++i) {
    ap += (pr[i].recall - prev_recall) * envelope[i];
    prev_recall = pr[i].recall;
  }
  return ap;
}

namespace detail {

struct Ranked {
  double confidence;
  std::size_t image;
  std::size_t index;
};

inline std::vector<Ranked> rank_by_confidence(std::vector<Ranked> items) {
  std::stable_sort(items.begin(), items.end(),
                   [](const Ranked& a, const Ranked& b) { return a.confidence > b.confidence; });
  return items;
}

inline double eval_scale(const ImageSize& image, double scale_to) {
  const double longest = std::max(image.width, image.height);
  require(longest > 0.0, "ground truth image size must be positive");
  return scale_to / longest;
}

inline EquipartitionLine scaled(const EquipartitionLine& line, double s, double shift_x = 0.0) {
  EquipartitionLine out = line;
  for (auto& p : out.points()) p = {s * (p.x + shift_x), s * p.y};
  return out;
}

// Distance table [pred][gt] for one image, using `metric` on the rescaled
// items and optionally the best of the three horizontal shifts.
template <typename Pred, typename Gt, typename Metric>
std::vector<std::vector<double>> distance_table(const std::vector<Pred>& preds, const std::vector<Gt>& gts,
                                                const ImageSize& image, const EvalOptions& options,
                                                Metric metric) {
  const double s = eval_scale(image, options.scale_to);
  std::vector<double> shifts{0.0};
  if (options.wrap_horizontal) shifts = {0.0, image.width, -image.width};
  std::vector<std::vector<double>> table(preds.size(), std::vector<double>(gts.size()));
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      double best = std::numeric_limits<double>::infinity();
      for (double shift : shifts) best = std::min(best, metric(preds[p], gts[g], s, shift));
      table[p][g] = best;
    }
  }
  return table;
}

// True-positive flags for predictions taken in `ranked` order.
inline std::vector<bool> greedy_flags(const std::vector<Ranked>& ranked,
                                      const std::vector<std::vector<std::vector<double>>>& tables,
                                      const std::vector<std::size_t>& gt_counts, double threshold) {
  std::vector<std::vector<bool>> consumed(gt_counts.size());
  for (std::size_t i = 0; i < gt_counts.size(); ++i) consumed[i].assign(gt_counts[i], false);
  std::vector<bool> flags;
  flags.reserve(ranked.size());
  for (const auto& r : ranked) {
    const auto& row = tables[r.image][r.index];
    std::size_t best = row.size();
    for (std::size_t g = 0; g < row.size(); ++g) {
      if (consumed[r.image][g] || !(row[g] < threshold)) continue;
      if (best == row.size() || row[g] < row[best]) best = g;
    }
    if (best != row.size()) consumed[r.image][best] = true;
    flags.push_back(best != row.size());
  }
  return flags;
}

inline ApCurve ap_from_flags(const std::vector<bool>& flags, std::size_t total_gt) {
  if (total_gt == 0) return {flags.empty() ? 1.0 : 0.0, {}};
  ApCurve out;
  out.pr = pr_points(flags, total_gt);
  out.ap = average_precision(out.pr);
  return out;
}

inline double line_metric(const LineProposal& pred, const EquipartitionLine& gt, double s, double shift) {
  return structural_distance(scaled(pred.points, s, shift), scaled(gt, s));
}

inline double junction_metric(const Junction& pred, const Point2& gt, double s, double shift) {
  const Point2 a{s * (pred.position.x + shift), s * pred.position.y};
  return distance(a, s * gt);
}

inline void require_aligned(const PredictionSet& preds, const GroundTruthSet& gts) {
  require(preds.size() == gts.size(), "prediction and ground-truth image counts differ");
}

}  // namespace detail

/// Line-level preparation shared by every threshold: the confidence ranking
/// and per-image distance tables.
class LineMatcher {
 public:
  LineMatcher(const PredictionSet& preds, const GroundTruthSet& gts, const EvalOptions& options = {}) {
    detail::require_aligned(preds, gts);
    std::vector<detail::Ranked> items;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      for (std::size_t k = 0; k < preds[i].lines.size(); ++k) {
        items.push_back({preds[i].lines[k].confidence, i, k});
      }
      tables_.push_back(detail::distance_table(preds[i].lines, gts[i].lines, gts[i].image, options,
                                               detail::line_metric));
      gt_counts_.push_back(gts[i].lines.size());
    }
    ranked_ = detail::rank_by_confidence(std::move(items));
    total_gt_ = std::accumulate(gt_counts_.begin(), gt_counts_.end(), std::size_t{0});
  }

  std::vector<bool> flags(double threshold) const {
    return detail::greedy_flags(ranked_, tables_, gt_counts_, threshold);
  }
  ApCurve ap(double threshold) const { return detail::ap_from_flags(flags(threshold), total_gt_); }
  std::size_t total_gt() const { return total_gt_; }

 private:
  std::vector<detail::Ranked> ranked_;
  std::vector<std::vector<std::vector<double>>> tables_;
  std::vector<std::size_t> gt_counts_;
  std::size_t total_gt_ = 0;
};

/// Structural AP at one squared-distance threshold (at evaluation scale).
inline ApCurve sap(const PredictionSet& preds, const GroundTruthSet& gts, double threshold,
                   const EvalOptions& options = {}) {
  return LineMatcher(preds, gts, options).ap(threshold);
}

/// Mean of sAP at 5, 10 and 15.
inline double msap(const PredictionSet& preds, const GroundTruthSet& gts, const EvalOptions& options = {}) {
  const LineMatcher matcher(preds, gts, options);
  double sum = 0.0;
  for (double t : kSapThresholds) sum += matcher.ap(t).ap;
  return sum / static_cast<double>(kSapThresholds.size());
}

/// Junction AP at one Euclidean threshold (at evaluation scale).
inline ApCurve junction_ap(const PredictionSet& preds, const GroundTruthSet& gts, double threshold,
                           const EvalOptions& options = {}) {
  detail::require_aligned(preds, gts);
  std::vector<detail::Ranked> items;
  std::vector<std::vector<std::vector<double>>> tables;
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t k = 0; k < preds[i].junctions.size(); ++k) {
      items.push_back({preds[i].junctions[k].confidence, i, k});
    }
    tables.push_back(detail::distance_table(preds[i].junctions, gts[i].junctions, gts[i].image, options,
                                            detail::junction_metric));
    counts.push_back(gts[i].junctions.size());
  }
  const auto ranked = detail::rank_by_confidence(std::move(items));
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  return detail::ap_from_flags(detail::greedy_flags(ranked, tables, counts, threshold), total);
}

/// Junction AP averaged over thresholds 0.5, 1 and 2.
inline double junction_map(const PredictionSet& preds, const GroundTruthSet& gts, const EvalOptions& options = {}) {
  double sum = 0.0;
  for (double t : kJunctionThresholds) sum += junction_ap(preds, gts, t, options).ap;
  return sum / static_cast<double>(kJunctionThresholds.size());
}

struct EvalReport {
  std::map<double, ApCurve> sap;
  double msap = 0.0;
  std::map<double, double> junction_ap;
  double map_j = 0.0;
};

inline EvalReport evaluate(const PredictionSet& preds, const GroundTruthSet& gts, const EvalOptions& options = {}) {
  EvalReport report;
  const LineMatcher matcher(preds, gts, options);
  double sum = 0.0;
  for (double t : kSapThresholds) {
    auto curve = matcher.ap(t);
    sum += curve.ap;
    report.sap.emplace(t, std::move(curve));
  }
  report.msap = sum / static_cast<double>(kSapThresholds.size());
  double jsum = 0.0;
  for (double t : kJunctionThresholds) {
    const double ap = junction_ap(preds, gts, t, options).ap;
    report.junction_ap.emplace(t, ap);
    jsum += ap;
  }
  report.map_j = jsum / static_cast<double>(kJunctionThresholds.size());
  return report;
}

}  // namespace ulsd
