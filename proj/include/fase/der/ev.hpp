#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fase/common/error.hpp"
#include "fase/common/rng.hpp"
#include "fase/common/timeslot.hpp"

namespace fase::der {

struct EvSpec {
  double capacity_kwh = 60.0;
  double charger_kw = 7.4;
  double efficiency = 0.9;
  std::string brand;

  void validate() const {
    if (!(capacity_kwh > 0.0) || !(charger_kw > 0.0) || !(efficiency > 0.0 && efficiency <= 1.0))
      throw DomainError("ev spec '" + brand + "': need capacity > 0, charger > 0, 0 < efficiency <= 1");
  }
};

struct EvBrand {
  std::string id;
  double capacity_kwh;
};

/// Twelve representative battery sizes between 30 and 100 kWh.
inline const std::vector<EvBrand>& default_ev_brands() {
  static const std::vector<EvBrand> brands{
      {"compact-30", 30.0}, {"compact-40", 40.0}, {"hatch-42", 42.0},   {"hatch-50", 50.0},
      {"sedan-58", 58.0},   {"sedan-64", 64.0},   {"crossover-66", 66.0}, {"crossover-75", 75.0},
      {"suv-77", 77.0},     {"suv-82", 82.0},     {"estate-90", 90.0},  {"premium-100", 100.0},
  };
  return brands;
}

struct EvBehaviorParams {
  double distance_median_km = 35.0;
  double distance_log_sigma = 0.6; ///< std of ln(distance)
  double plug_in_mean_h = 18.0;
  double plug_in_std_h = 2.0;
  double kwh_per_km = 0.18;
  double charger_kw = 7.4;
  double efficiency = 0.9;
  double max_discharge_fraction = 0.95; ///< daily E_dr is capped at this share of capacity

  double mean_distance_km() const {
    return distance_median_km * std::exp(0.5 * distance_log_sigma * distance_log_sigma);
  }
};

struct EvTrip {
  double distance_km = 0.0;
  int plug_in_slot = 0; ///< slot of day
  EvSpec spec;
};

namespace detail {

inline double lognormal(std::mt19937_64& gen, double median, double log_sigma) {
  NormalSampler n;
  return median * std::exp(log_sigma * n(gen));
}

// Hour of day from a Gaussian truncated to [0, 24).
inline int plug_in_slot(std::mt19937_64& gen, double mean_h, double std_h) {
  NormalSampler n;
  for (;;) {
    const double h = mean_h + std_h * n(gen);
    if (h >= 0.0 && h < 24.0)
      return static_cast<int>(h / kSlotHours);
  }
}

inline EvSpec pick_brand(std::mt19937_64& gen, const std::vector<EvBrand>& brands, const EvBehaviorParams& p) {
  const auto k = static_cast<std::size_t>(NormalSampler::uniform01(gen) * static_cast<double>(brands.size()));
  const auto& b = brands[std::min(k, brands.size() - 1)];
  EvSpec s{b.capacity_kwh, p.charger_kw, p.efficiency, b.id};
  s.validate();
  return s;
}

} // namespace detail

/// One day of driving per vehicle: distance, plug-in slot and vehicle.
inline std::vector<EvTrip> sample_ev_behavior(std::uint64_t seed, int fleet_size,
                                              const std::vector<EvBrand>& brands = default_ev_brands(),
                                              const EvBehaviorParams& p = {}) {
  if (fleet_size < 1)
    throw DomainError("sample_ev_behavior: fleet size must be at least 1");
  if (brands.empty())
    throw DomainError("sample_ev_behavior: empty brand table");
  std::vector<EvTrip> out;
  out.reserve(static_cast<std::size_t>(fleet_size));
  for (int v = 0; v < fleet_size; ++v) {
    auto gen = entity_rng(seed, static_cast<std::uint64_t>(v), "ev-day");
    EvTrip t;
    t.spec = detail::pick_brand(gen, brands, p);
    t.distance_km = detail::lognormal(gen, p.distance_median_km, p.distance_log_sigma);
    t.plug_in_slot = detail::plug_in_slot(gen, p.plug_in_mean_h, p.plug_in_std_h);
    out.push_back(t);
  }
  return out;
}

inline double ev_initial_soc(double e_dr_kwh, const EvSpec& spec) {
  spec.validate();
  if (!(e_dr_kwh >= 0.0) || e_dr_kwh > spec.capacity_kwh)
    throw DomainError("ev_initial_soc: discharged energy " + std::to_string(e_dr_kwh) + " kWh outside [0, " +
                      std::to_string(spec.capacity_kwh) + "]");
  return std::clamp(1.0 - e_dr_kwh / spec.capacity_kwh, 0.0, 1.0);
}

/// Hours at rated power needed to refill from `soc`.
inline double ev_charging_duration(double soc, const EvSpec& spec) {
  spec.validate();
  if (!(soc > 0.0) || soc > 1.0)
    throw DomainError("ev_charging_duration: initial state of charge must lie in (0, 1]");
  return spec.capacity_kwh * (1.0 - soc) / (spec.charger_kw * spec.efficiency);
}

/// Slot-by-slot charging control for a session starting at `start_slot`.
struct EvSession {
  long start_slot = 0;
  double duration_h = 0.0;
  std::vector<double> remaining_slots; ///< RC(t) before each charging slot
  std::vector<double> control;         ///< u(t), 1 for full slots, fraction in the last one
  std::vector<double> demand_kw;       ///< E(t) = P_rated u(t)

  long end_slot() const { return start_slot + static_cast<long>(demand_kw.size()); }
};

/// Full slots at rated power; the final slot carries the fraction that
/// completes the energy exactly.
inline EvSession ev_charging_profile(long start_slot, double duration_h, const EvSpec& spec) {
  spec.validate();
  if (!(duration_h >= 0.0))
    throw DomainError("ev_charging_profile: duration must be non-negative");
  EvSession s;
  s.start_slot = start_slot;
  s.duration_h = duration_h;
  double rc = duration_h / kSlotHours;
  while (rc > 1e-9) {
    const double u = std::min(1.0, rc);
    s.remaining_slots.push_back(rc);
    s.control.push_back(u);
    s.demand_kw.push_back(spec.charger_kw * u);
    rc -= u;
  }
  return s;
}

/// Year-long charging demand of one vehicle (kW per slot).
///
/// The vehicle is drawn once; every day draws a distance and a plug-in slot.
/// A session that would start before the previous one finished is delayed
/// to its end, so sessions never overlap.
inline std::vector<double> simulate_ev_year(std::uint64_t seed, std::uint64_t vehicle, long slots,
                                            const std::vector<EvBrand>& brands = default_ev_brands(),
                                            const EvBehaviorParams& p = {}) {
  if (brands.empty())
    throw DomainError("simulate_ev_year: empty brand table");
  auto gen = entity_rng(seed, vehicle, "ev-year");
  const EvSpec spec = detail::pick_brand(gen, brands, p);
  std::vector<double> kw(static_cast<std::size_t>(std::max(0L, slots)), 0.0);
  long busy_until = 0;
  for (long day = 0; day * kSlotsPerDay < slots; ++day) {
    const double km = detail::lognormal(gen, p.distance_median_km, p.distance_log_sigma);
    const long plug = day * kSlotsPerDay + detail::plug_in_slot(gen, p.plug_in_mean_h, p.plug_in_std_h);
    const double e_dr = std::min(km * p.kwh_per_km, p.max_discharge_fraction * spec.capacity_kwh);
    const double soc = ev_initial_soc(e_dr, spec);
    const auto session = ev_charging_profile(std::max(plug, busy_until), ev_charging_duration(soc, spec), spec);
    for (std::size_t i = 0; i < session.demand_kw.size(); ++i) {
      const long t = session.start_slot + static_cast<long>(i);
      if (t < slots)
        kw[static_cast<std::size_t>(t)] += session.demand_kw[i];
    }
    busy_until = session.end_slot();
  }
  return kw;
}

} // namespace fase::der
