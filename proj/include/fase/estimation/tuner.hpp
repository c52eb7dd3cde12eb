#pragma once

#include <algorithm>
#include <cmath>

#include "fase/common/error.hpp"
#include "fase/estimation/holt.hpp"

namespace fase::est {

struct TunerParams {
  double tau = 0.013;    ///< beta step
  double epsilon = 0.01; ///< alpha step
  double upsilon = 0.09; ///< threshold on the change of the branch-current rate (pu per slot)
  double lower = 0.05;
  double upper = 0.99;
  double min_gap = 1e-3; ///< alpha - beta after a violated ordering is repaired

  void validate() const {
    if (!(tau > 0.0) || !(epsilon > 0.0) || !(upsilon >= 0.0))
      throw ConfigError("tuner: tau and epsilon must be positive, upsilon non-negative");
    if (!(lower > 0.0 && lower < upper && upper < 1.0))
      throw ConfigError("tuner: need 0 < lower < upper < 1");
  }
};

/// Adjusts one phase's smoothing pair from two consecutive current-rate samples.
///
/// delta = rate_next - rate: both parameters step up when delta > upsilon,
/// step down when delta < -upsilon and hold otherwise.
inline SmoothingParams adapt_smoothing(SmoothingParams s, const TunerParams& t, double rate, double rate_next) {
  if (!(rate >= 0.0) || !(rate_next >= 0.0))
    throw DomainError("adapt_smoothing: rates must be non-negative");
  const double delta = rate_next - rate;
  if (delta > t.upsilon) {
    s.alpha += t.epsilon;
    s.beta += t.tau;
  } else if (delta < -t.upsilon) {
    s.alpha -= t.epsilon;
    s.beta -= t.tau;
  }
  s.alpha = std::clamp(s.alpha, t.lower, t.upper);
  s.beta = std::clamp(s.beta, t.lower, t.upper);
  if (!(s.alpha > s.beta))
    s.beta = s.alpha - t.min_gap;
  return s;
}

} // namespace fase::est
