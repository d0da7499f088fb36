#pragma once

// Shared generators and brute-force reference implementations for the unit
// tests and the acceptance runner. Nothing here calls into the library code
// it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <vector>

#include "ulsd/ulsd.hpp"

namespace ulsd::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Point2 random_point(std::mt19937_64& rng, double lo, double hi) {
  return {uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

inline Polyline random_points(std::mt19937_64& rng, std::size_t count, double lo, double hi) {
  Polyline out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_point(rng, lo, hi));
  return out;
}

inline EquipartitionLine random_line(std::mt19937_64& rng, std::size_t order, double w, double h) {
  Polyline pts;
  for (std::size_t i = 0; i <= order; ++i) pts.push_back({uniform(rng, 0.0, w), uniform(rng, 0.0, h)});
  return EquipartitionLine(std::move(pts));
}

inline EquipartitionLine jittered(const EquipartitionLine& line, std::mt19937_64& rng, double amount) {
  EquipartitionLine out = line;
  for (auto& p : out.points()) p += Point2{uniform(rng, -amount, amount), uniform(rng, -amount, amount)};
  return out;
}

// Sum of squared point distances at scale s, minimized over orientation,
// written as two explicit loops.
inline double brute_structural(const Polyline& a, const Polyline& b, double s, double shift_x) {
  double fwd = 0.0, rev = 0.0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double ax = s * (a[i].x + shift_x), ay = s * a[i].y;
    const double fx = ax - s * b[i].x, fy = ay - s * b[i].y;
    const double rx = ax - s * b[n - 1 - i].x, ry = ay - s * b[n - 1 - i].y;
    fwd += fx * fx + fy * fy;
    rev += rx * rx + ry * ry;
  }
  return std::min(fwd, rev);
}

struct BruteItem {
  double confidence;
  std::size_t image;
  std::size_t index;
};

// Insertion sort by descending confidence; equal confidences keep input order.
inline std::vector<BruteItem> brute_rank(std::vector<BruteItem> items) {
  for (std::size_t i = 1; i < items.size(); ++i) {
    for (std::size_t j = i; j > 0 && items[j - 1].confidence < items[j].confidence; --j) {
      std::swap(items[j - 1], items[j]);
    }
  }
  return items;
}

inline double brute_ap(const std::vector<bool>& tp, std::size_t total_gt) {
  if (total_gt == 0) return tp.empty() ? 1.0 : 0.0;
  const std::size_t n = tp.size();
  std::vector<double> recall(n), precision(n);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    hits += tp[i] ? 1 : 0;
    recall[i] = static_cast<double>(hits) / static_cast<double>(total_gt);
    precision[i] = static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  double ap = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = 0.0;
    for (std::size_t j = i; j < n; ++j) best = std::max(best, precision[j]);
    ap += (recall[i] - (i == 0 ? 0.0 : recall[i - 1])) * best;
  }
  return ap;
}

// Exhaustive greedy matcher: every prediction scans every ground-truth item
// of its image and claims the nearest unclaimed one under the threshold.
template <typename DistanceFn>
double brute_greedy_ap(const std::vector<BruteItem>& ranked, const std::vector<std::size_t>& gt_counts,
                       double threshold, DistanceFn dist) {
  std::vector<std::vector<char>> used(gt_counts.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < gt_counts.size(); ++i) {
    used[i].assign(gt_counts[i], 0);
    total += gt_counts[i];
  }
  std::vector<bool> tp;
  for (const auto& item : ranked) {
    double best_d = std::numeric_limits<double>::infinity();
    std::size_t best = gt_counts[item.image];
    for (std::size_t g = 0; g < gt_counts[item.image]; ++g) {
      if (used[item.image][g]) continue;
      const double d = dist(item.image, item.index, g);
      if (d < threshold && d < best_d) {
        best_d = d;
        best = g;
      }
    }
    if (best < gt_counts[item.image]) used[item.image][best] = 1;
    tp.push_back(best < gt_counts[item.image]);
  }
  return brute_ap(tp, total);
}

inline double brute_sap(const PredictionSet& preds, const GroundTruthSet& gts, double threshold,
                        bool wrap = false, double scale_to = 128.0) {
  std::vector<BruteItem> items;
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t k = 0; k < preds[i].lines.size(); ++k) items.push_back({preds[i].lines[k].confidence, i, k});
    counts.push_back(gts[i].lines.size());
  }
  return brute_greedy_ap(brute_rank(items), counts, threshold, [&](std::size_t img, std::size_t p, std::size_t g) {
    const auto& size = gts[img].image;
    const double s = scale_to / std::max(size.width, size.height);
    const auto& a = preds[img].lines[p].points.points();
    const auto& b = gts[img].lines[g].points();
    double d = brute_structural(a, b, s, 0.0);
    if (wrap) {
      d = std::min(d, brute_structural(a, b, s, size.width));
      d = std::min(d, brute_structural(a, b, s, -size.width));
    }
    return d;
  });
}

inline double brute_junction_ap(const PredictionSet& preds, const GroundTruthSet& gts, double threshold,
                                double scale_to = 128.0) {
  std::vector<BruteItem> items;
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t k = 0; k < preds[i].junctions.size(); ++k) {
      items.push_back({preds[i].junctions[k].confidence, i, k});
    }
    counts.push_back(gts[i].junctions.size());
  }
  return brute_greedy_ap(brute_rank(items), counts, threshold, [&](std::size_t img, std::size_t p, std::size_t g) {
    const auto& size = gts[img].image;
    const double s = scale_to / std::max(size.width, size.height);
    const auto a = preds[img].junctions[p].position;
    const auto b = gts[img].junctions[g];
    return std::hypot(s * a.x - s * b.x, s * a.y - s * b.y);
  });
}

// Random evaluation instance: up to max_lines ground-truth lines per image,
// predictions mixing jittered copies of ground truth with random clutter.
struct EvalInstance {
  PredictionSet preds;
  GroundTruthSet gts;
};

inline EvalInstance random_eval_instance(std::mt19937_64& rng, std::size_t images, std::size_t max_lines,
                                         std::size_t order = 1) {
  EvalInstance inst;
  std::uniform_int_distribution<std::size_t> count(0, max_lines);
  for (std::size_t i = 0; i < images; ++i) {
    const ImageSize size = i % 2 == 0 ? ImageSize{512.0, 512.0} : ImageSize{640.0, 480.0};
    ImageGroundTruth gt{size, {}, {}};
    ImagePrediction pred;
    const std::size_t n_gt = count(rng);
    for (std::size_t k = 0; k < n_gt; ++k) {
      gt.lines.push_back(random_line(rng, order, size.width, size.height));
      gt.junctions.push_back(gt.lines.back().front());
    }
    for (const auto& l : gt.lines) {
      if (uniform(rng, 0.0, 1.0) < 0.8) {
        // Quantized confidences force plenty of ties.
        const double conf = std::round(uniform(rng, 0.0, 1.0) * 10.0) / 10.0;
        auto line = jittered(l, rng, uniform(rng, 0.0, 12.0));
        if (uniform(rng, 0.0, 1.0) < 0.5) line = line.reversed();
        pred.lines.push_back({line, conf});
        pred.junctions.push_back({line.front(), conf});
      }
    }
    const std::size_t clutter = count(rng) / 2;
    for (std::size_t k = 0; k < clutter; ++k) {
      const double conf = std::round(uniform(rng, 0.0, 1.0) * 10.0) / 10.0;
      pred.lines.push_back({random_line(rng, order, size.width, size.height), conf});
      pred.junctions.push_back({random_point(rng, 0.0, size.height), conf});
    }
    std::shuffle(pred.lines.begin(), pred.lines.end(), rng);
    inst.preds.push_back(std::move(pred));
    inst.gts.push_back(std::move(gt));
  }
  return inst;
}

// Central finite difference of f around x[i].
template <typename F>
double central_difference(F f, std::vector<double> x, std::size_t i, double h = 1e-5) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

}  // namespace ulsd::testing
