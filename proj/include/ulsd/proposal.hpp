#pragma once

// Structural line distance, line/junction matching, and positive/negative
// sampling of line proposals for training the line classifier.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ulsd/bezier.hpp"
#include "ulsd/error.hpp"
#include "ulsd/grid_codec.hpp"

namespace ulsd {

/// Sum of squared distances between corresponding equipartition points,
/// minimized over the two orientations of the second line. Squared pixels.
inline double structural_distance(const EquipartitionLine& a, const EquipartitionLine& b) {
  if (a.order() != b.order()) {
    throw ValidationError("structural distance between lines of order " + std::to_string(a.order()) +
                          " and " + std::to_string(b.order()));
  }
  const std::size_t n = a.order();
  double forward = 0.0;
  double backward = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    forward += squared_distance(a[i], b[i]);
    backward += squared_distance(a[i], b[n - i]);
  }
  return std::min(forward, backward);
}

inline constexpr double kDefaultMatchRadius = 10.0;
inline constexpr double kDefaultEta = 4.0;

struct MatchedLine {
  EquipartitionLine points;
  std::pair<std::size_t, std::size_t> junction_ids;  // start, end
  double match_cost = 0.0;
  double confidence = 1.0;
};

namespace detail {

inline std::optional<std::pair<std::size_t, double>> nearest_junction(
    const Point2& p, std::span<const Junction> junctions, double radius) {
  std::optional<std::pair<std::size_t, double>> best;
  for (std::size_t j = 0; j < junctions.size(); ++j) {
    const double d = distance(p, junctions[j].position);
    if (d <= radius && (!best || d < best->second)) best = {j, d};
  }
  return best;
}

}  // namespace detail

/// Snaps both endpoints of every proposal to their nearest junction within
/// `radius`. Proposals with an unmatched endpoint, or with both endpoints on
/// the same junction, are dropped. Per unordered junction pair only the
/// proposal with the smallest total endpoint distance survives (earlier
/// proposals win ties). Interior point k moves by
/// (1 - k/n) * start_shift + (k/n) * end_shift.
inline std::vector<MatchedLine> match_lines_junctions(std::span<const LineProposal> proposals,
                                                      std::span<const Junction> junctions,
                                                      double radius = kDefaultMatchRadius) {
  detail::require(radius > 0.0, "match radius must be positive");
  std::vector<MatchedLine> candidates;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> best_by_pair;
  for (const auto& prop : proposals) {
    const auto start = detail::nearest_junction(prop.points.front(), junctions, radius);
    const auto end = detail::nearest_junction(prop.points.back(), junctions, radius);
    if (!start || !end || start->first == end->first) continue;

    const Point2 ds = junctions[start->first].position - prop.points.front();
    const Point2 de = junctions[end->first].position - prop.points.back();
    EquipartitionLine pts = prop.points;
    const std::size_t n = pts.order();
    for (std::size_t k = 1; k < n; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(n);
      pts[k] += (1.0 - t) * ds + t * de;
    }
    pts[0] = junctions[start->first].position;
    pts[n] = junctions[end->first].position;

    MatchedLine m{std::move(pts), {start->first, end->first}, start->second + end->second, prop.confidence};
    const auto key = std::minmax(start->first, end->first);
    auto it = best_by_pair.find(key);
    if (it == best_by_pair.end()) {
      best_by_pair.emplace(key, candidates.size());
      candidates.push_back(std::move(m));
    } else if (m.match_cost < candidates[it->second].match_cost) {
      candidates[it->second] = std::move(m);
    }
  }
  return candidates;
}

enum class SampleLabel { kNegative = 0, kPositive = 1 };

struct LabeledSample {
  EquipartitionLine line;
  SampleLabel label = SampleLabel::kNegative;
  std::optional<std::size_t> matched_gt;
  double distance = std::numeric_limits<double>::infinity();
  // Index into the proposal list, empty for injected ground-truth lines.
  std::optional<std::size_t> proposal_index;
};

/// Labels every proposal: positive when its structural distance to the
/// nearest ground-truth line is below eta.
inline std::vector<LabeledSample> label_proposals(std::span<const LineProposal> proposals,
                                                  std::span<const EquipartitionLine> gt, double eta) {
  detail::require(eta > 0.0, "eta must be positive");
  std::vector<LabeledSample> pool;
  pool.reserve(proposals.size());
  for (std::size_t p = 0; p < proposals.size(); ++p) {
    LabeledSample s{proposals[p].points, SampleLabel::kNegative, std::nullopt,
                    std::numeric_limits<double>::infinity(), p};
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const double d = structural_distance(proposals[p].points, gt[g]);
      if (d < s.distance) {
        s.distance = d;
        s.matched_gt = g;
      }
    }
    if (s.distance < eta) {
      s.label = SampleLabel::kPositive;
    } else {
      s.matched_gt.reset();
    }
    pool.push_back(std::move(s));
  }
  return pool;
}

struct SampleOptions {
  double eta = kDefaultEta;
  std::size_t n_pos = 300;
  std::size_t n_neg = 40;
  // Ground-truth lines injected as extra positives; nullopt injects all.
  std::optional<std::size_t> n_gt = std::nullopt;
  std::uint64_t seed = 0;
};

struct SampleResult {
  std::vector<LabeledSample> samples;
  std::size_t positive_shortfall = 0;
  std::size_t negative_shortfall = 0;
};

namespace detail {

// Unbiased integer in [0, bound) by rejection on the raw 64-bit stream, so
// results do not depend on the standard library's distribution code.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

// k distinct indices from [0, n) by a partial Fisher-Yates shuffle,
// returned in ascending order.
inline std::vector<std::size_t> choose(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(bounded(rng, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

/// Labels proposals against ground truth, then draws n_pos positives and
/// n_neg negatives without replacement using an explicitly seeded
/// mt19937_64. Ground-truth lines are appended as extra positives.
inline SampleResult sample_training_lines(std::span<const LineProposal> proposals,
                                          std::span<const EquipartitionLine> gt,
                                          const SampleOptions& options) {
  auto pool = label_proposals(proposals, gt, options.eta);
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    (pool[i].label == SampleLabel::kPositive ? pos : neg).push_back(i);
  }

  SampleResult result;
  result.positive_shortfall = options.n_pos > pos.size() ? options.n_pos - pos.size() : 0;
  result.negative_shortfall = options.n_neg > neg.size() ? options.n_neg - neg.size() : 0;

  std::mt19937_64 rng(options.seed);
  for (std::size_t k : detail::choose(pos.size(), options.n_pos, rng)) {
    result.samples.push_back(pool[pos[k]]);
  }
  for (std::size_t k : detail::choose(neg.size(), options.n_neg, rng)) {
    result.samples.push_back(pool[neg[k]]);
  }
  const std::size_t n_gt = options.n_gt.value_or(gt.size());
  for (std::size_t k : detail::choose(gt.size(), n_gt, rng)) {
    result.samples.push_back({gt[k], SampleLabel::kPositive, k, 0.0, std::nullopt});
  }
  return result;
}

}  // namespace ulsd
