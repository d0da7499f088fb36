#pragma once

// Reference implementations of the detector's training losses, each with its
// analytic gradient with respect to the prediction. Every component reduces
// by the mean over the elements it covers; offset terms only cover bins that
// hold a ground-truth junction or line center unless masking is disabled.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ulsd/error.hpp"
#include "ulsd/grid_codec.hpp"
#include "ulsd/planes.hpp"

namespace ulsd {

inline constexpr double kBceEpsilon = 1e-7;

struct LossWeights {
  double conf_j = 1.0;
  double offset_j = 1.0;
  double center = 1.0;
  double offset = 1.0;
  double pos = 1.0;
  double neg = 1.0;

  void validate() const {
    for (double v : {conf_j, offset_j, center, offset, pos, neg}) {
      detail::require(std::isfinite(v) && v >= 0.0, "loss weights must be finite and non-negative");
    }
  }
};

struct LossValue {
  double value = 0.0;
  std::vector<double> grad;
};

inline LossValue bce(std::span<const double> pred, std::span<const double> target) {
  detail::require(pred.size() == target.size(), "BCE shape mismatch");
  LossValue out{0.0, std::vector<double>(pred.size(), 0.0)};
  if (pred.empty()) return out;
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double t = target[i];
    const double p = std::clamp(pred[i], kBceEpsilon, 1.0 - kBceEpsilon);
    out.value -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    if (pred[i] > kBceEpsilon && pred[i] < 1.0 - kBceEpsilon) {
      out.grad[i] = (-t / p + (1.0 - t) / (1.0 - p)) / n;
    }
  }
  out.value /= n;
  return out;
}

inline LossValue smooth_l1(std::span<const double> pred, std::span<const double> target) {
  detail::require(pred.size() == target.size(), "smooth L1 shape mismatch");
  LossValue out{0.0, std::vector<double>(pred.size(), 0.0)};
  if (pred.empty()) return out;
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double x = pred[i] - target[i];
    const double ax = std::abs(x);
    if (ax < 1.0) {
      out.value += 0.5 * x * x;
      out.grad[i] = x / n;
    } else {
      out.value += ax - 0.5;
      out.grad[i] = (x > 0.0 ? 1.0 : -1.0) / n;
    }
  }
  out.value /= n;
  return out;
}

struct LossTerm {
  double value = 0.0;
  std::map<std::string, double> parts;
};

struct LossOptions {
  bool mask_offsets = true;
};

namespace detail {

// Smooth L1 over the selected channels of a map stack, restricted to bins
// where `occupancy` is non-zero. Writes weight * d(loss)/d(pred) into grad.
inline double masked_offset_loss(const Planes<double>& pred, const Planes<double>& target,
                                 const Planes<double>& occupancy, std::size_t first_channel,
                                 std::size_t channel_count, bool mask, double weight,
                                 Planes<double>& grad) {
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < occupancy.plane_size(); ++i) {
    if (!mask || occupancy.data()[i] != 0.0) cells.push_back(i);
  }
  std::vector<double> p, t;
  p.reserve(cells.size() * channel_count);
  t.reserve(cells.size() * channel_count);
  for (std::size_t c = first_channel; c < first_channel + channel_count; ++c) {
    for (std::size_t i : cells) {
      p.push_back(pred.plane(c)[i]);
      t.push_back(target.plane(c)[i]);
    }
  }
  const auto l = smooth_l1(p, t);
  std::size_t k = 0;
  for (std::size_t c = first_channel; c < first_channel + channel_count; ++c) {
    for (std::size_t i : cells) grad.plane(c)[i] += weight * l.grad[k++];
  }
  return l.value;
}

inline double confidence_loss(const Planes<double>& pred, const Planes<double>& target, double weight,
                              Planes<double>& grad) {
  const auto l = bce(pred.data(), target.data());
  for (std::size_t i = 0; i < l.grad.size(); ++i) grad.data()[i] += weight * l.grad[i];
  return l.value;
}

}  // namespace detail

struct JunctionLoss {
  LossTerm term;
  JunctionMaps grad;
};

/// conf_j * BCE(confidence) + offset_j * smoothL1(offsets on occupied bins).
inline JunctionLoss junction_loss(const JunctionMaps& pred, const JunctionMaps& gt,
                                  const LossWeights& w = {}, const LossOptions& options = {}) {
  w.validate();
  detail::require(pred.confidence.same_shape(gt.confidence) && pred.offsets.same_shape(gt.offsets),
                  "junction map shapes differ");
  detail::require(gt.confidence.channels() == 1 && gt.offsets.channels() == 2,
                  "junction maps need 1 confidence and 2 offset channels");
  JunctionLoss out{{}, {Planes<double>(1, gt.confidence.height(), gt.confidence.width()),
                        Planes<double>(2, gt.offsets.height(), gt.offsets.width())}};
  const double conf = detail::confidence_loss(pred.confidence, gt.confidence, w.conf_j, out.grad.confidence);
  const double off = detail::masked_offset_loss(pred.offsets, gt.offsets, gt.confidence, 0, 2,
                                                options.mask_offsets, w.offset_j, out.grad.offsets);
  out.term.parts = {{"junction_conf", conf}, {"junction_offset", off}};
  out.term.value = w.conf_j * conf + w.offset_j * off;
  return out;
}

struct LineLoss {
  LossTerm term;
  LineMaps grad;
};

/// center * (BCE(center confidence) + smoothL1(center sub-bin offset)) +
/// offset * sum over the m stored offset vectors of smoothL1(vector).
inline LineLoss line_loss(const LineMaps& pred, const LineMaps& gt, const LossWeights& w = {},
                          const LossOptions& options = {}) {
  w.validate();
  if (pred.order != gt.order) throw ValidationError("line map orders differ");
  detail::require(pred.confidence.same_shape(gt.confidence) &&
                      pred.center_offsets.same_shape(gt.center_offsets) &&
                      pred.eq_offsets.same_shape(gt.eq_offsets),
                  "line map shapes differ");
  const std::size_t m = stored_offset_count(gt.order);
  detail::require(gt.eq_offsets.channels() == 2 * m, "line offset channel count does not match order");
  const std::size_t h = gt.confidence.height();
  const std::size_t wd = gt.confidence.width();
  LineLoss out{{}, {gt.order, Planes<double>(1, h, wd), Planes<double>(2, h, wd), Planes<double>(2 * m, h, wd)}};

  const double conf = detail::confidence_loss(pred.confidence, gt.confidence, w.center, out.grad.confidence);
  const double center_off = detail::masked_offset_loss(pred.center_offsets, gt.center_offsets, gt.confidence,
                                                       0, 2, options.mask_offsets, w.center,
                                                       out.grad.center_offsets);
  double offsets = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    offsets += detail::masked_offset_loss(pred.eq_offsets, gt.eq_offsets, gt.confidence, 2 * i, 2,
                                          options.mask_offsets, w.offset, out.grad.eq_offsets);
  }
  out.term.parts = {{"line_center_conf", conf}, {"line_center_offset", center_off}, {"line_offset", offsets}};
  out.term.value = w.center * (conf + center_off) + w.offset * offsets;
  return out;
}

struct ClsLoss {
  LossTerm term;
  std::vector<double> grad;
};

/// pos * BCE over positive samples + neg * BCE over negative samples, each
/// meaned over its own subset. An absent class contributes 0.
inline ClsLoss cls_loss(std::span<const double> pred_conf, std::span<const int> labels,
                        const LossWeights& w = {}) {
  w.validate();
  detail::require(pred_conf.size() == labels.size(), "classifier loss shape mismatch");
  detail::require(!pred_conf.empty(), "classifier loss needs at least one sample");
  std::vector<std::size_t> pos_idx, neg_idx;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    detail::require(labels[i] == 0 || labels[i] == 1, "labels must be 0 or 1");
    (labels[i] == 1 ? pos_idx : neg_idx).push_back(i);
  }
  ClsLoss out{{}, std::vector<double>(pred_conf.size(), 0.0)};
  auto subset = [&](const std::vector<std::size_t>& idx, double target, double weight) {
    std::vector<double> p, t(idx.size(), target);
    p.reserve(idx.size());
    for (std::size_t i : idx) p.push_back(pred_conf[i]);
    const auto l = bce(p, t);
    for (std::size_t k = 0; k < idx.size(); ++k) out.grad[idx[k]] += weight * l.grad[k];
    return l.value;
  };
  const double pos = subset(pos_idx, 1.0, w.pos);
  const double neg = subset(neg_idx, 0.0, w.neg);
  out.term.parts = {{"cls_pos", pos}, {"cls_neg", neg}};
  out.term.value = w.pos * pos + w.neg * neg;
  return out;
}

struct LossReport {
  double junction = 0.0;
  double line = 0.0;
  double cls = 0.0;
  double total = 0.0;
  std::map<std::string, double> components;
};

inline LossReport total_loss(const LossTerm& junction, const LossTerm& line, const LossTerm& cls) {
  for (double v : {junction.value, line.value, cls.value}) {
    detail::require(std::isfinite(v), "loss components must be finite");
  }
  LossReport r{junction.value, line.value, cls.value, junction.value + line.value + cls.value, {}};
  for (const auto* term : {&junction, &line, &cls}) {
    r.components.insert(term->parts.begin(), term->parts.end());
  }
  return r;
}

}  // namespace ulsd
