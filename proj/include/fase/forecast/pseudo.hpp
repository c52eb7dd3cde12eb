#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fase/common/error.hpp"
#include "fase/forecast/baseline.hpp"
#include "fase/grid/network.hpp"
#include "fase/measure/measurement.hpp"

namespace fase::forecast {

enum class PseudoSigma {
  relative, ///< fraction of the forecast value
  forecast, ///< the forecaster's own error standard deviation
};

inline PseudoSigma parse_pseudo_sigma(const std::string& s) {
  if (s == "relative")
    return PseudoSigma::relative;
  if (s == "forecast")
    return PseudoSigma::forecast;
  throw ConfigError("pseudo sigma mode must be 'relative' or 'forecast', got '" + s + "'");
}

struct PseudoOptions {
  PseudoSigma mode = PseudoSigma::relative;
  double rel = 0.10;
  double floor_pu = 1e-4;

  void validate() const {
    if (!(rel > 0.0) || !(floor_pu > 0.0))
      throw ConfigError("pseudo-measurements: rel and floor must be positive");
  }
};

/// Injection pseudo-measurements from demand forecasts, one set per slot.
///
/// P = -forecast / base (injections count generation as positive); Q follows
/// at the node's snapshot Q/P ratio with the same relative uncertainty.
inline std::vector<measure::MeasurementSet> pseudo_measurements(const grid::NetworkModel& net, const ForecastSeries& f,
                                                                const std::vector<long>& slots,
                                                                const PseudoOptions& o = {}) {
  o.validate();
  const double base = net.phase_power_base_kva();
  const auto snapshot = net.snapshot_demand_pu();
  std::vector<double> ratio(f.buses.size(), 0.0);
  for (std::size_t j = 0; j < f.buses.size(); ++j) {
    if (!net.has_bus(f.buses[j]))
      throw SchemaError("forecasts: unknown bus '" + f.buses[j] + "'");
    const int node = net.node_index(net.bus_index(f.buses[j]), f.phases[j]);
    if (node < 0)
      throw SchemaError("forecasts: bus '" + f.buses[j] + "' has no phase " + grid::phase_char(f.phases[j]));
    if (net.node(node).bus == net.slack_index())
      throw SchemaError("forecasts: slack bus '" + f.buses[j] + "' cannot carry a pseudo-measurement");
    const auto s = snapshot[static_cast<std::size_t>(node)];
    ratio[j] = s.real() != 0.0 ? s.imag() / s.real() : 0.0;
  }
  std::vector<measure::MeasurementSet> out;
  out.reserve(slots.size());
  for (long slot : slots) {
    const long r = f.row(slot);
    if (r < 0)
      throw SchemaError("forecasts: no forecast for slot " + std::to_string(slot));
    measure::MeasurementSet set;
    set.slot = slot;
    for (std::size_t j = 0; j < f.buses.size(); ++j) {
      const auto c = static_cast<Eigen::Index>(j);
      const double p = -f.p_kw(r, c) / base;
      const double sp = std::max(o.mode == PseudoSigma::relative ? o.rel * std::abs(p) : f.std_kw(r, c) / base,
                                 o.floor_pu);
      const double sq = std::max(sp * std::abs(ratio[j]), o.floor_pu);
      const measure::Location loc{f.buses[j], {}, f.phases[j]};
      set.entries.push_back({{measure::Kind::pseudo_injection_p, loc, sp}, p, sp * sp, measure::Origin::pseudo});
      set.entries.push_back(
          {{measure::Kind::pseudo_injection_q, loc, sq}, p * ratio[j], sq * sq, measure::Origin::pseudo});
    }
    out.push_back(std::move(set));
  }
  return out;
}

} // namespace fase::forecast
