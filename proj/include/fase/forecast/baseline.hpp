#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fase/common/error.hpp"
#include "fase/estimation/holt.hpp"
#include "fase/forecast/features.hpp"
#include "fase/forecast/supervised.hpp"

namespace fase::forecast {

/// Per-slot, per-node point forecasts with an error standard deviation (kW).
struct ForecastSeries {
  std::vector<long> slots;
  std::vector<std::string> buses;
  std::vector<Phase> phases;
  Eigen::MatrixXd p_kw;   ///< slots x nodes
  Eigen::MatrixXd std_kw; ///< slots x nodes, > 0

  long size() const { return static_cast<long>(slots.size()); }

  /// Column of (bus, phase), or -1.
  int column(const std::string& bus, Phase p) const {
    for (std::size_t j = 0; j < buses.size(); ++j)
      if (buses[j] == bus && phases[j] == p)
        return static_cast<int>(j);
    return -1;
  }

  /// Row of `slot`, or -1.
  long row(long slot) const {
    if (slots.empty() || slot < slots.front() || slot > slots.back())
      return -1;
    const long r = slot - slots.front();
    if (r < size() && slots[static_cast<std::size_t>(r)] == slot)
      return r;
    for (std::size_t i = 0; i < slots.size(); ++i)
      if (slots[i] == slot)
        return static_cast<long>(i);
    return -1;
  }
};

struct BaselineParams {
  est::SmoothingParams smoothing{0.5, 0.2};
  long rmse_window = 48;
  double std_floor = 1e-6;
};

/// One-step-ahead Holt forecasts of a series: pred[t] uses x[0..t-1]; pred[0]
/// repeats x[0]. With a single observation the forecast is persistence.
/// std[t] is the RMSE of the errors of pred[s] for s in [t - rmse_window, t),
/// s >= 1, floored; with no past error it is the floor.
inline void holt_one_step(const std::vector<double>& x, const BaselineParams& p, std::vector<double>& pred,
                          std::vector<double>& sd) {
  est::check_smoothing(p.smoothing);
  if (p.rmse_window < 1 || !(p.std_floor > 0.0))
    throw ConfigError("baseline forecaster: rmse_window must be >= 1 and std_floor > 0");
  const std::size_t n = x.size();
  pred.assign(n, 0.0);
  sd.assign(n, p.std_floor);
  if (n == 0)
    return;
  auto h = est::HoltScalar::start(x[0]);
  pred[0] = x[0];
  std::vector<double> sq(n, 0.0); // squared error of pred[t]
  double window_sum = 0.0;
  for (std::size_t t = 1; t < n; ++t) {
    pred[t] = h.forecast;
    const auto lo = static_cast<std::size_t>(std::max<long>(1, static_cast<long>(t) - p.rmse_window));
    if (t >= 2) {
      window_sum += sq[t - 1];
      if (lo >= 2)
        window_sum -= sq[lo - 1];
      const double m = window_sum / static_cast<double>(t - lo);
      sd[t] = std::max(std::sqrt(std::max(m, 0.0)), p.std_floor);
    }
    const double e = x[t] - pred[t];
    sq[t] = e * e;
    h.update(x[t], p.smoothing);
  }
}

/// Baseline forecasts for every target row of the windowed dataset (rows w .. N-1).
inline ForecastSeries baseline_forecast(const FeatureFrame& frame, const WindowedDataset& d,
                                        const BaselineParams& p = {}) {
  if (d.count() < 1 || frame.size() != d.rows)
    throw DomainError("baseline_forecast: dataset does not match the feature frame");
  ForecastSeries out;
  const long w = d.window;
  const auto nodes = frame.targets.cols();
  out.slots.assign(frame.slots.begin() + w, frame.slots.end());
  out.buses = frame.target_ids;
  out.phases.assign(static_cast<std::size_t>(nodes), frame.phase);
  out.p_kw.resize(d.count(), nodes);
  out.std_kw.resize(d.count(), nodes);
  std::vector<double> pred, sd;
  for (Eigen::Index j = 0; j < nodes; ++j) {
    std::vector<double> x(frame.targets.col(j).data(), frame.targets.col(j).data() + frame.targets.rows());
    holt_one_step(x, p, pred, sd);
    for (long r = 0; r < d.count(); ++r) {
      out.p_kw(r, j) = pred[static_cast<std::size_t>(r + w)];
      out.std_kw(r, j) = sd[static_cast<std::size_t>(r + w)];
    }
  }
  return out;
}

} // namespace fase::forecast
