#pragma once

// Bezier curves as the shared line representation: Bernstein evaluation,
// conversion between control points and equipartition points, and
// least-squares fitting of curves to sampled polylines.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ulsd/error.hpp"
#include "ulsd/geometry.hpp"

namespace ulsd {

inline constexpr std::size_t kMinOrder = 1;
inline constexpr std::size_t kMaxOrder = 6;

namespace detail {

inline void require_unit_interval(double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw ValidationError("curve parameter " + std::to_string(t) + " outside [0, 1]");
  }
}

inline void require_order(std::size_t order) {
  if (order < kMinOrder || order > kMaxOrder) {
    throw ValidationError("Bezier order " + std::to_string(order) + " outside [1, 6]");
  }
}

inline double binomial(std::size_t n, std::size_t k) {
  double c = 1.0;
  for (std::size_t j = 1; j <= k; ++j) c = c * static_cast<double>(n - k + j) / static_cast<double>(j);
  return c;
}

inline double int_pow(double base, std::size_t e) {
  double r = 1.0;
  for (std::size_t j = 0; j < e; ++j) r *= base;
  return r;
}

}  // namespace detail

/// Bernstein basis polynomial B_{i,n}(t) = C(n,i) t^i (1-t)^(n-i).
inline double bernstein_basis(std::size_t i, std::size_t n, double t) {
  if (i > n) {
    throw ValidationError("basis index " + std::to_string(i) + " exceeds order " + std::to_string(n));
  }
  detail::require_unit_interval(t);
  return detail::binomial(n, i) * detail::int_pow(t, i) * detail::int_pow(1.0 - t, n - i);
}

/// An order-n Bezier curve held as its n+1 control points.
class BezierSegment {
 public:
  explicit BezierSegment(Polyline control_points) : control_points_(std::move(control_points)) {
    detail::require(control_points_.size() >= 2, "a Bezier segment needs at least two control points");
    detail::require_order(control_points_.size() - 1);
    for (const auto& p : control_points_) {
      detail::require(is_finite(p), "non-finite control point");
    }
  }

  std::size_t order() const { return control_points_.size() - 1; }
  const Polyline& control_points() const { return control_points_; }
  const Point2& operator[](std::size_t i) const { return control_points_[i]; }

 private:
  Polyline control_points_;
};

/// A curve represented by n+1 points at parameters t_k = k/n.
class EquipartitionLine {
 public:
  explicit EquipartitionLine(Polyline points) : points_(std::move(points)) {
    detail::require(points_.size() >= 2, "a line needs at least two points");
  }

  std::size_t order() const { return points_.size() - 1; }
  std::size_t size() const { return points_.size(); }
  const Polyline& points() const { return points_; }
  Polyline& points() { return points_; }
  const Point2& operator[](std::size_t i) const { return points_[i]; }
  Point2& operator[](std::size_t i) { return points_[i]; }
  const Point2& front() const { return points_.front(); }
  const Point2& back() const { return points_.back(); }

  EquipartitionLine reversed() const {
    return EquipartitionLine(Polyline(points_.rbegin(), points_.rend()));
  }

  friend bool operator==(const EquipartitionLine&, const EquipartitionLine&) = default;

 private:
  Polyline points_;
};

/// Evaluates the curve at t by de Casteljau's recurrence, which reproduces
/// the endpoints exactly at t = 0 and t = 1.
inline Point2 evaluate(const BezierSegment& curve, double t) {
  detail::require_unit_interval(t);
  Polyline work = curve.control_points();
  const double s = 1.0 - t;
  for (std::size_t level = work.size() - 1; level > 0; --level) {
    for (std::size_t i = 0; i < level; ++i) work[i] = s * work[i] + t * work[i + 1];
  }
  return work.front();
}

/// Rows are parameter values, columns are basis functions: entry (j, i) is
/// B_{i,n}(ts[j]).
inline Eigen::MatrixXd interpolation_matrix(std::size_t order, std::span<const double> ts) {
  detail::require(!ts.empty(), "interpolation matrix needs at least one parameter value");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(ts.size()), static_cast<Eigen::Index>(order + 1));
  for (std::size_t j = 0; j < ts.size(); ++j) {
    for (std::size_t i = 0; i <= order; ++i) {
      a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = bernstein_basis(i, order, ts[j]);
    }
  }
  return a;
}

inline std::vector<double> uniform_parameters(std::size_t count) {
  detail::require(count >= 2, "need at least two parameter values");
  std::vector<double> ts(count);
  const double denom = static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) ts[k] = static_cast<double>(k) / denom;
  return ts;
}

enum class ParamMode { kUniform, kChordLength };

inline std::string to_string(ParamMode mode) {
  return mode == ParamMode::kUniform ? "uniform" : "chord";
}

inline ParamMode parse_param_mode(const std::string& s) {
  if (s == "uniform") return ParamMode::kUniform;
  if (s == "chord" || s == "chord-length") return ParamMode::kChordLength;
  throw ValidationError("unknown parameter mode '" + s + "' (expected uniform or chord)");
}

/// Parameter value assigned to each sample of a polyline.
inline std::vector<double> assign_parameters(std::span<const Point2> samples, ParamMode mode) {
  detail::require(samples.size() >= 2, "need at least two samples");
  if (mode == ParamMode::kUniform) return uniform_parameters(samples.size());

  std::vector<double> ts(samples.size(), 0.0);
  for (std::size_t j = 1; j < samples.size(); ++j) {
    ts[j] = ts[j - 1] + distance(samples[j - 1], samples[j]);
  }
  const double total = ts.back();
  if (!(total > 0.0)) throw DegenerateInputError("all samples coincide; chord length is zero");
  for (auto& t : ts) t /= total;
  ts.back() = 1.0;
  return ts;
}

/// Control points of the curve passing through n+1 equipartition points.
inline BezierSegment from_equipartition(const EquipartitionLine& line) {
  const std::size_t n = line.order();
  detail::require_order(n);
  const auto ts = uniform_parameters(n + 1);
  const Eigen::MatrixXd a = interpolation_matrix(n, ts);
  Eigen::MatrixXd p(static_cast<Eigen::Index>(n + 1), 2);
  for (std::size_t k = 0; k <= n; ++k) {
    p(static_cast<Eigen::Index>(k), 0) = line[k].x;
    p(static_cast<Eigen::Index>(k), 1) = line[k].y;
  }
  const Eigen::MatrixXd b = a.partialPivLu().solve(p);
  Polyline controls(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    controls[i] = {b(static_cast<Eigen::Index>(i), 0), b(static_cast<Eigen::Index>(i), 1)};
  }
  // The endpoints are interpolated exactly; keep them bit-identical.
  controls.front() = line.front();
  controls.back() = line.back();
  return BezierSegment(std::move(controls));
}

/// Points at t_k = k/(count-1).
inline EquipartitionLine equipartition_points(const BezierSegment& curve, std::size_t count) {
  detail::require(count >= 2, "equipartition needs at least two points");
  Polyline pts;
  pts.reserve(count);
  for (double t : uniform_parameters(count)) pts.push_back(evaluate(curve, t));
  return EquipartitionLine(std::move(pts));
}

inline EquipartitionLine to_equipartition(const BezierSegment& curve) {
  return equipartition_points(curve, curve.order() + 1);
}

struct FitOptions {
  ParamMode params = ParamMode::kUniform;
  // Pin b_0 and b_n to the first and last samples and solve only for the
  // interior control points.
  bool pin_endpoints = false;
};

/// Least-squares Bezier fit of the given order to m >= order+1 samples.
inline BezierSegment fit_control_points(std::span<const Point2> samples, std::size_t order,
                                        const FitOptions& options = {}) {
  detail::require_order(order);
  if (samples.size() < order + 1) {
    throw ValidationError("fitting order " + std::to_string(order) + " needs at least " +
                          std::to_string(order + 1) + " samples, got " + std::to_string(samples.size()));
  }
  for (const auto& p : samples) detail::require(is_finite(p), "non-finite sample");
  const bool all_coincident = std::all_of(samples.begin(), samples.end(),
                                          [&](const Point2& p) { return p == samples.front(); });
  if (all_coincident) throw DegenerateInputError("all samples coincide; the fit is degenerate");

  const auto ts = assign_parameters(samples, options.params);
  const Eigen::MatrixXd a = interpolation_matrix(order, ts);
  const auto m = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd rhs(m, 2);
  for (Eigen::Index j = 0; j < m; ++j) {
    rhs(j, 0) = samples[static_cast<std::size_t>(j)].x;
    rhs(j, 1) = samples[static_cast<std::size_t>(j)].y;
  }

  Polyline controls(order + 1);
  if (options.pin_endpoints) {
    const Point2 first = samples.front();
    const Point2 last = samples.back();
    controls.front() = first;
    controls.back() = last;
    if (order >= 2) {
      const auto n = static_cast<Eigen::Index>(order);
      for (Eigen::Index j = 0; j < m; ++j) {
        rhs(j, 0) -= a(j, 0) * first.x + a(j, n) * last.x;
        rhs(j, 1) -= a(j, 0) * first.y + a(j, n) * last.y;
      }
      const Eigen::MatrixXd interior = a.middleCols(1, n - 1);
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(interior);
      if (qr.rank() < interior.cols()) throw DegenerateInputError("rank-deficient design matrix");
      const Eigen::MatrixXd b = qr.solve(rhs);
      for (Eigen::Index i = 0; i < n - 1; ++i) {
        controls[static_cast<std::size_t>(i + 1)] = {b(i, 0), b(i, 1)};
      }
    }
  } else {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < a.cols()) throw DegenerateInputError("rank-deficient design matrix");
    const Eigen::MatrixXd b = qr.solve(rhs);
    for (std::size_t i = 0; i <= order; ++i) {
      controls[i] = {b(static_cast<Eigen::Index>(i), 0), b(static_cast<Eigen::Index>(i), 1)};
    }
  }
  return BezierSegment(std::move(controls));
}

struct FitReport {
  double mean_error = 0.0;
  double max_error = 0.0;
  std::vector<double> per_point_errors;
};

/// Distance between the curve and each reference point, pairing reference
/// point j with the curve at its assigned parameter t_j.
inline FitReport fitting_error(const BezierSegment& curve, std::span<const Point2> reference,
                               ParamMode mode = ParamMode::kUniform) {
  const auto ts = assign_parameters(reference, mode);
  FitReport report;
  report.per_point_errors.reserve(reference.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < reference.size(); ++j) {
    const double e = distance(evaluate(curve, ts[j]), reference[j]);
    report.per_point_errors.push_back(e);
    sum += e;
    report.max_error = std::max(report.max_error, e);
  }
  report.mean_error = sum / static_cast<double>(reference.size());
  return report;
}

/// Sum of squared residuals of the fit; the quantity least squares minimizes.
inline double squared_residual(const BezierSegment& curve, std::span<const Point2> reference,
                               ParamMode mode = ParamMode::kUniform) {
  const auto ts = assign_parameters(reference, mode);
  double sum = 0.0;
  for (std::size_t j = 0; j < reference.size(); ++j) {
    sum += squared_distance(evaluate(curve, ts[j]), reference[j]);
  }
  return sum;
}

struct FitResult {
  BezierSegment curve;
  FitReport report;
};

inline FitResult fit_polyline(std::span<const Point2> samples, std::size_t order,
                              const FitOptions& options = {}) {
  auto curve = fit_control_points(samples, order, options);
  auto report = fitting_error(curve, samples, options.params);
  return {std::move(curve), std::move(report)};
}

}  // namespace ulsd
