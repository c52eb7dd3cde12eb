#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fase/common/error.hpp"
#include "fase/common/rng.hpp"
#include "fase/common/timeslot.hpp"

namespace fase::der {

/// Optional components of one connection point; empty spans are absent.
struct HouseholdParts {
  std::span<const double> base_kw;
  std::span<const double> pv_kw;
  std::span<const double> bess_kw; ///< battery power, + charging
  std::span<const double> ev_kw;
  std::span<const double> hvac_kw;
  double export_cap_kw = std::numeric_limits<double>::infinity();
};

/// Net demand base - PV + EV + HVAC + battery, with export limited to the cap.
inline std::vector<double> compose_household(const HouseholdParts& h) {
  const std::size_t n = h.base_kw.size();
  auto check = [n](std::span<const double> s, const char* what) {
    if (!s.empty() && s.size() != n)
      throw DomainError(std::string("compose_household: ") + what + " series has " + std::to_string(s.size()) +
                        " slots, base has " + std::to_string(n));
  };
  check(h.pv_kw, "pv");
  check(h.bess_kw, "bess");
  check(h.ev_kw, "ev");
  check(h.hvac_kw, "hvac");
  if (!(h.export_cap_kw >= 0.0))
    throw DomainError("compose_household: export cap must be non-negative");
  std::vector<double> net(h.base_kw.begin(), h.base_kw.end());
  for (std::size_t t = 0; t < n; ++t) {
    if (!h.pv_kw.empty())
      net[t] -= h.pv_kw[t];
    if (!h.ev_kw.empty())
      net[t] += h.ev_kw[t];
    if (!h.hvac_kw.empty())
      net[t] += h.hvac_kw[t];
    if (!h.bess_kw.empty())
      net[t] += h.bess_kw[t];
    if (net[t] < -h.export_cap_kw)
      net[t] = -h.export_cap_kw;
  }
  return net;
}

struct AggregatedProfile {
  std::vector<double> p_kw;
  double sigma_rel = 0.0; ///< relative error applied after summation (0 if none)
  std::uint64_t error_seed = 0;
};

/// Slot-wise sum over households, accumulated in household order.
inline AggregatedProfile aggregate_mv(const std::vector<std::vector<double>>& households) {
  if (households.empty())
    throw DomainError("aggregate_mv: no households");
  const std::size_t n = households.front().size();
  if (n == 0 || n % kSlotsPerDay != 0)
    throw DomainError("aggregate_mv: series length " + std::to_string(n) + " is not a whole number of days");
  for (std::size_t i = 0; i < households.size(); ++i)
    if (households[i].size() != n)
      throw DomainError("aggregate_mv: household " + std::to_string(i) + " has " +
                        std::to_string(households[i].size()) + " slots, expected " + std::to_string(n));
  AggregatedProfile agg;
  agg.p_kw.assign(n, 0.0);
  for (const auto& h : households)
    for (std::size_t t = 0; t < n; ++t)
      agg.p_kw[t] += h[t];
  return agg;
}

/// Multiplies every slot by (1 + e_t), e_t ~ N(0, sigma_rel^2).
inline AggregatedProfile inject_aggregation_error(AggregatedProfile p, double sigma_rel, std::uint64_t seed) {
  if (!(sigma_rel >= 0.0))
    throw DomainError("inject_aggregation_error: sigma_rel must be non-negative");
  p.sigma_rel = sigma_rel;
  p.error_seed = seed;
  if (sigma_rel == 0.0)
    return p;
  auto gen = entity_rng(seed, 0, "aggregation-error");
  NormalSampler normal;
  for (double& v : p.p_kw)
    v *= 1.0 + sigma_rel * normal(gen);
  return p;
}

} // namespace fase::der
