#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fase/common/error.hpp"

namespace fase::forecast {

enum class Split { train, validation, test };

inline const char* split_name(Split s) {
  switch (s) {
  case Split::train: return "train";
  case Split::validation: return "validation";
  case Split::test: return "test";
  }
  return "?";
}

struct SplitRatios {
  double train = 0.70;
  double validation = 0.15;

  void validate() const {
    if (!(train > 0.0) || !(validation >= 0.0) || !(train + validation <= 1.0))
      throw ConfigError("split ratios must satisfy train > 0, validation >= 0, train + validation <= 1");
  }
};

/// Half-open ranges of window indices per split.
struct SplitRanges {
  long train_end = 0;
  long validation_end = 0;
  long count = 0;

  Split of(long j) const { return j < train_end ? Split::train : (j < validation_end ? Split::validation : Split::test); }
};

/// Min-max scaling per column; constant columns map to 0.
struct MinMaxScaler {
  Eigen::VectorXd min;
  Eigen::VectorXd max;

  static MinMaxScaler fit(const Eigen::MatrixXd& rows) {
    if (rows.rows() == 0)
      throw DomainError("min-max scaler: no rows to fit");
    return {rows.colwise().minCoeff().transpose(), rows.colwise().maxCoeff().transpose()};
  }

  Eigen::MatrixXd transform(const Eigen::MatrixXd& rows) const {
    Eigen::MatrixXd out(rows.rows(), rows.cols());
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      const double span = max[c] - min[c];
      out.col(c) = span > 0.0 ? Eigen::VectorXd((rows.col(c).array() - min[c]) / span)
                              : Eigen::VectorXd::Zero(rows.rows());
    }
    return out;
  }

  Eigen::MatrixXd inverse(const Eigen::MatrixXd& scaled) const {
    Eigen::MatrixXd out(scaled.rows(), scaled.cols());
    for (Eigen::Index c = 0; c < scaled.cols(); ++c)
      out.col(c) = (scaled.col(c).array() * (max[c] - min[c]) + min[c]).matrix();
    return out;
  }
};

/// Sliding windows over a row series: window j covers rows [j, j + w) and
/// predicts row j + w. Splits are chronological in window order.
struct WindowedDataset {
  long window = 0;
  long rows = 0;
  SplitRanges splits;
  MinMaxScaler feature_scale; ///< fitted on rows seen by training windows
  MinMaxScaler target_scale;

  long count() const { return rows - window; }
  long input_begin(long j) const { return j; }
  long target_row(long j) const { return j + window; }
  /// Rows touched by the training split (inputs and targets).
  long training_rows() const { return splits.train_end + window; }
};

inline SplitRanges chronological_split(long count, const SplitRatios& r) {
  r.validate();
  SplitRanges s;
  s.count = count;
  s.train_end = static_cast<long>(std::floor(r.train * static_cast<double>(count)));
  s.validation_end = s.train_end + static_cast<long>(std::floor(r.validation * static_cast<double>(count)));
  if (s.train_end < 1)
    s.train_end = std::min(1L, count);
  s.validation_end = std::clamp(s.validation_end, s.train_end, count);
  return s;
}

/// Windowing of `features` (N x F) and `targets` (N x T) with window length `w`.
inline WindowedDataset make_supervised(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets, long w,
                                       const SplitRatios& ratios = {}) {
  const long n = features.rows();
  if (w < 1)
    throw DomainError("make_supervised: window length must be at least 1");
  if (targets.rows() != n)
    throw DomainError("make_supervised: features have " + std::to_string(n) + " rows, targets " +
                      std::to_string(targets.rows()));
  if (n <= w)
    throw DomainError("make_supervised: series length " + std::to_string(n) + " must exceed window length " +
                      std::to_string(w));
  WindowedDataset d;
  d.window = w;
  d.rows = n;
  d.splits = chronological_split(n - w, ratios);
  const long fit_rows = d.training_rows();
  d.feature_scale = MinMaxScaler::fit(features.topRows(fit_rows));
  d.target_scale = targets.cols() > 0 ? MinMaxScaler::fit(targets.topRows(fit_rows)) : MinMaxScaler{};
  return d;
}

} // namespace fase::forecast
