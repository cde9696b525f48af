#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <string>
#include <vector>

#include "specmesh/core/error.hpp"
#include "specmesh/core/tensor.hpp"

namespace specmesh {

/// sqrt(width * height) of the x/y bounding box of a K x d point set.
template <typename T>
double hull_size(const Tensor<T>& gt) {
  require(gt.rank() == 2 && gt.dim(1) >= 2, "nme: expected K x d ground-truth points");
  require(gt.dim(0) >= 2, "nme: need at least two landmarks");
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (std::size_t k = 0; k < gt.dim(0); ++k) {
    xmin = std::min<double>(xmin, gt.at(k, 0));
    xmax = std::max<double>(xmax, gt.at(k, 0));
    ymin = std::min<double>(ymin, gt.at(k, 1));
    ymax = std::max<double>(ymax, gt.at(k, 1));
  }
  const double area = (xmax - xmin) * (ymax - ymin);
  if (!(area > 0.0)) throw ValidationError("nme: ground-truth landmark hull has zero area");
  return std::sqrt(area);
}

/// Mean Euclidean distance over the first `dims` coordinates (2 or 3).
template <typename T>
double mean_distance(const Tensor<T>& pred, const Tensor<T>& gt, int dims) {
  require(dims == 2 || dims == 3, "nme: mode must be 2 or 3");
  require(pred.shape() == gt.shape(), "nme: prediction " + pred.shape().str() + " vs ground truth " + gt.shape().str());
  require(gt.rank() == 2 && gt.dim(1) >= static_cast<std::size_t>(dims), "nme: expected K x d landmarks");
  require(gt.dim(0) >= 1, "nme: no points");
  double total = 0.0;
  for (std::size_t k = 0; k < gt.dim(0); ++k) {
    double d2 = 0.0;
    for (int c = 0; c < dims; ++c) {
      const double d = static_cast<double>(pred.at(k, static_cast<std::size_t>(c))) - gt.at(k, static_cast<std::size_t>(c));
      d2 += d * d;
    }
    total += std::sqrt(d2);
  }
  return total / static_cast<double>(gt.dim(0));
}

/// Mean landmark distance divided by the size of the ground-truth x/y hull.
template <typename T>
double nme(const Tensor<T>& pred, const Tensor<T>& gt, int dims) {
  const double d = mean_distance(pred, gt, dims);
  return d / hull_size(gt);
}

/// Rows of `points` selected by index.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& points, const std::vector<std::uint32_t>& rows) {
  require(points.rank() == 2, "gather_rows: expected a matrix");
  Tensor<T> out(Shape{rows.size(), points.dim(1)});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < points.dim(0), "gather_rows: index out of range");
    std::copy_n(points.data() + rows[i] * points.dim(1), points.dim(1), out.data() + i * points.dim(1));
  }
  return out;
}

struct CedPoint {
  double threshold;
  double fraction;
};

/// Fraction of errors <= each threshold.
inline std::vector<CedPoint> ced_curve(const std::vector<double>& errors, const std::vector<double>& thresholds) {
  require(std::is_sorted(thresholds.begin(), thresholds.end()), "ced_curve: thresholds must be ascending");
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  std::vector<CedPoint> out;
  for (double t : thresholds) {
    const auto n = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    out.push_back({t, sorted.empty() ? 0.0 : static_cast<double>(n) / static_cast<double>(sorted.size())});
  }
  return out;
}

/// Evenly spaced thresholds 0, step, ..., max.
inline std::vector<double> ced_thresholds(double max, std::size_t count) {
  require(count >= 2 && max > 0, "ced_thresholds: need count >= 2 and max > 0");
  std::vector<double> t(count);
  for (std::size_t i = 0; i < count; ++i) t[i] = max * static_cast<double>(i) / static_cast<double>(count - 1);
  return t;
}

/// Means over |yaw| in [0, 30), [30, 60), [60, 90]; empty bins are absent.
inline std::array<std::optional<double>, 3> yaw_binned_report(const std::vector<double>& nmes,
                                                              const std::vector<double>& yaws) {
  require(nmes.size() == yaws.size(), "yaw_binned_report: one yaw per sample required");
  std::array<double, 3> sum{};
  std::array<std::size_t, 3> count{};
  for (std::size_t i = 0; i < nmes.size(); ++i) {
    const double a = std::abs(yaws[i]);
    if (!(a <= 90.0)) throw ValidationError("yaw_binned_report: yaw " + std::to_string(yaws[i]) + " outside [-90, 90]");
    const std::size_t bin = a < 30.0 ? 0 : (a < 60.0 ? 1 : 2);
    sum[bin] += nmes[i];
    ++count[bin];
  }
  std::array<std::optional<double>, 3> out;
  for (std::size_t b = 0; b < 3; ++b)
    if (count[b] > 0) out[b] = sum[b] / static_cast<double>(count[b]);
  return out;
}

struct EvalReport {
  std::vector<std::string> sample_ids;
  std::vector<double> nme;
  std::vector<std::optional<double>> yaw;
  std::vector<CedPoint> ced;

  double mean_nme() const {
    if (nme.empty()) return 0.0;
    double s = 0.0;
    for (double v : nme) s += v;
    return s / static_cast<double>(nme.size());
  }
};

inline void write_nme_csv(const std::string& path, const EvalReport& r) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << "sample_id,nme,yaw\n" << std::setprecision(9);
  for (std::size_t i = 0; i < r.nme.size(); ++i) {
    out << r.sample_ids[i] << ',' << r.nme[i] << ',';
    if (i < r.yaw.size() && r.yaw[i]) out << *r.yaw[i];
    out << '\n';
  }
}

inline void write_ced_csv(const std::string& path, const std::vector<CedPoint>& ced) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << "threshold,fraction\n" << std::setprecision(9);
  for (const auto& p : ced) out << p.threshold << ',' << p.fraction << '\n';
}

}  // namespace specmesh
