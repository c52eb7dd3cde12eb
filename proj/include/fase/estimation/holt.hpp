#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fase/common/error.hpp"
#include "fase/grid/network.hpp"

namespace fase::est {

struct SmoothingParams {
  double alpha = 0.7;
  double beta = 0.3;
};

inline void check_smoothing(const SmoothingParams& s) {
  // alpha = 1 is allowed: it degenerates to persistence.
  if (!(s.alpha > 0.0 && s.alpha <= 1.0) || !(s.beta >= 0.0 && s.beta < 1.0) || !(s.alpha > s.beta))
    throw DomainError("smoothing parameters out of range: alpha=" + std::to_string(s.alpha) +
                      " beta=" + std::to_string(s.beta) + " (need 0 < beta < alpha <= 1)");
}

/// Double exponential smoothing of a single series.
struct HoltScalar {
  double level = 0.0;
  double trend = 0.0;
  double forecast = 0.0; ///< one-step prediction of the next observation

  static HoltScalar start(double x0) { return {x0, 0.0, x0}; }

  void update(double x, const SmoothingParams& s) {
    const double prev_level = level;
    level = s.alpha * x + (1.0 - s.alpha) * forecast;
    trend = s.beta * (level - prev_level) + (1.0 - s.beta) * trend;
    forecast = level + trend;
  }
};

/// Levels and trends for every state component, one parameter pair per phase.
struct HoltState {
  Eigen::VectorXd level;
  Eigen::VectorXd trend;
  Eigen::VectorXd forecast; ///< x~_k, the prediction the latest estimate corrected
  std::vector<grid::Phase> phase; ///< phase of each component
  std::array<SmoothingParams, 3> params{};

  static HoltState start(const Eigen::VectorXd& x0, std::vector<grid::Phase> component_phase,
                         SmoothingParams init) {
    check_smoothing(init);
    if (static_cast<Eigen::Index>(component_phase.size()) != x0.size())
      throw DomainError("holt: component phase list does not match the state size");
    HoltState h;
    h.level = x0;
    h.trend = Eigen::VectorXd::Zero(x0.size());
    h.forecast = x0;
    h.phase = std::move(component_phase);
    h.params.fill(init);
    return h;
  }

  const SmoothingParams& params_of(Eigen::Index i) const { return params[static_cast<int>(phase[i])]; }
};

struct HoltPrediction {
  Eigen::VectorXd x_pred; ///< x~_{k+1}
  Eigen::VectorXd F;      ///< diagonal of F_k
  Eigen::VectorXd g;      ///< offset g_k
  HoltState state;        ///< state after absorbing x_k
};

/// One prediction step from the corrected estimate `x`.
///
/// a_k = alpha x_k + (1 - alpha) x~_k, b_k = beta (a_k - a_{k-1}) + (1 - beta) b_{k-1},
/// x~_{k+1} = a_k + b_k. The returned affine form satisfies x~_{k+1} = F x_k + g with
/// F = alpha (1 + beta), so F is the sensitivity of the prediction to the estimate
/// and drives the covariance time update.
inline HoltPrediction holt_update(const Eigen::VectorXd& x, const HoltState& holt) {
  const Eigen::Index n = x.size();
  if (holt.level.size() != n || holt.trend.size() != n || holt.forecast.size() != n ||
      static_cast<Eigen::Index>(holt.phase.size()) != n)
    throw DomainError("holt_update: state size mismatch");
  for (const auto& s : holt.params)
    check_smoothing(s);

  HoltPrediction out{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), holt};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = holt.params_of(i);
    const double a_prev = holt.level[i];
    const double b_prev = holt.trend[i];
    const double a = s.alpha * x[i] + (1.0 - s.alpha) * holt.forecast[i];
    const double b = s.beta * (a - a_prev) + (1.0 - s.beta) * b_prev;
    out.x_pred[i] = a + b;
    out.F[i] = s.alpha * (1.0 + s.beta);
    out.g[i] = (1.0 + s.beta) * (1.0 - s.alpha) * holt.forecast[i] - s.beta * a_prev + (1.0 - s.beta) * b_prev;
    out.state.level[i] = a;
    out.state.trend[i] = b;
    out.state.forecast[i] = a + b;
  }
  return out;
}

} // namespace fase::est
