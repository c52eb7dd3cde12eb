#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fase/common/error.hpp"
#include "fase/common/rng.hpp"
#include "fase/common/timeslot.hpp"

namespace fase::der {

using Series = std::vector<double>;

struct Weather {
  Series ambient_c;
  Series irradiance_wm2;

  std::size_t size() const { return ambient_c.size(); }
};

struct WeatherParams {
  double latitude_deg = 52.0;
  double annual_mean_c = 10.5;
  double seasonal_amplitude_c = 6.5;
  double diurnal_amplitude_c = 3.0;
  double daily_anomaly_c = 2.5; ///< std of the day-to-day temperature anomaly
  double cloud_persistence = 0.6;
};

namespace detail {

inline double day_angle(long day) { return 2.0 * std::numbers::pi * static_cast<double>(day % 365) / 365.0; }

// Sine of the solar elevation at the middle of a slot (solar time).
inline double sun_height(double latitude_deg, long day, int slot) {
  const double rad = std::numbers::pi / 180.0;
  const double decl = 23.45 * rad * std::sin(2.0 * std::numbers::pi * (284.0 + static_cast<double>(day % 365 + 1)) / 365.0);
  const double hour = (slot + 0.5) * kSlotHours;
  const double omega = 15.0 * rad * (hour - 12.0);
  const double phi = latitude_deg * rad;
  return std::sin(phi) * std::sin(decl) + std::cos(phi) * std::cos(decl) * std::cos(omega);
}

} // namespace detail

/// Synthetic temperate-climate year: seasonal and diurnal temperature cycles
/// with persistent daily anomalies, and clear-sky irradiance scaled by a
/// persistent daily clearness index.
inline Weather synthetic_weather(std::uint64_t seed, int days, const WeatherParams& p = {}) {
  if (days < 1)
    throw DomainError("synthetic_weather: need at least one day");
  auto gen = entity_rng(seed, 0, "weather");
  NormalSampler normal;
  Weather w;
  const auto n = static_cast<std::size_t>(days) * kSlotsPerDay;
  w.ambient_c.reserve(n);
  w.irradiance_wm2.reserve(n);
  double anomaly = 0.0, cloud = 0.0;
  for (long d = 0; d < days; ++d) {
    anomaly = 0.7 * anomaly + std::sqrt(1.0 - 0.49) * p.daily_anomaly_c * normal(gen);
    cloud = p.cloud_persistence * cloud + std::sqrt(1.0 - p.cloud_persistence * p.cloud_persistence) * normal(gen);
    const double clearness = std::clamp(0.55 + 0.25 * cloud, 0.1, 0.95);
    const double season = -std::cos(detail::day_angle(d) - 2.0 * std::numbers::pi * 20.0 / 365.0);
    for (int s = 0; s < kSlotsPerDay; ++s) {
      const double hour = (s + 0.5) * kSlotHours;
      const double diurnal = std::sin(2.0 * std::numbers::pi * (hour - 9.0) / 24.0);
      w.ambient_c.push_back(p.annual_mean_c + p.seasonal_amplitude_c * season + p.diurnal_amplitude_c * diurnal +
                            anomaly + 0.3 * normal(gen));
      const double h = detail::sun_height(p.latitude_deg, d, s);
      const double clear = h > 0.0 ? 1098.0 * h * std::exp(-0.057 / h) : 0.0;
      const double flicker = std::clamp(1.0 + 0.15 * normal(gen), 0.3, 1.3);
      w.irradiance_wm2.push_back(std::max(0.0, clear * clearness * flicker));
    }
  }
  return w;
}

struct TariffParams {
  double night = 0.12; ///< 00:00-07:00
  double day = 0.24;
  double peak = 0.38;  ///< 16:00-19:00 on weekdays
  double weekend = 0.20;
};

/// Time-of-use tariff, currency per kWh per slot.
inline Series time_of_use_price(long slots, const SlotClock& clock = SlotClock{}, const TariffParams& t = {}) {
  Series price(static_cast<std::size_t>(std::max(0L, slots)));
  for (long k = 0; k < slots; ++k) {
    const int s = slot_of_day(k);
    double c = t.day;
    if (s < 14)
      c = t.night;
    else if (clock.day_of_week(k) >= 5)
      c = t.weekend;
    else if (s >= 32 && s < 38)
      c = t.peak;
    price[static_cast<std::size_t>(k)] = c;
  }
  return price;
}

namespace detail {

inline double bump(double hour, double centre, double width) {
  const double d = std::remainder(hour - centre, 24.0);
  return std::exp(-0.5 * d * d / (width * width));
}

} // namespace detail

/// Residential base demand (kW): night floor, morning and evening peaks,
/// winter uplift, per-household scale and timing offsets, slot-level noise.
inline Series household_base_profile(std::uint64_t seed, std::uint64_t entity, long slots,
                                     const SlotClock& clock = SlotClock{}) {
  auto gen = entity_rng(seed, entity, "household-base");
  NormalSampler normal;
  const double scale = std::exp(0.3 * normal(gen));
  const double shift = 0.75 * normal(gen);
  const double evening = 0.7 + 0.4 * NormalSampler::uniform01(gen);
  Series kw(static_cast<std::size_t>(std::max(0L, slots)));
  for (long k = 0; k < slots; ++k) {
    const long day = k / kSlotsPerDay;
    const double hour = (slot_of_day(k) + 0.5) * kSlotHours;
    const double winter = 1.0 + 0.25 * std::cos(detail::day_angle(day) - 2.0 * std::numbers::pi * 15.0 / 365.0);
    const double weekend = clock.day_of_week(k) >= 5 ? 1.15 : 1.0;
    const double shape = 0.22 + 0.35 * detail::bump(hour, 7.5 + shift, 1.0) * weekend +
                         evening * detail::bump(hour, 18.5 + shift, 1.6) + 0.12 * detail::bump(hour, 13.0, 2.5) * weekend;
    kw[static_cast<std::size_t>(k)] = scale * winter * shape * std::exp(0.15 * normal(gen) - 0.5 * 0.15 * 0.15);
  }
  return kw;
}

/// Small commercial unit (kW): weekday opening-hours plateau over a standby floor.
inline Series commercial_base_profile(std::uint64_t seed, std::uint64_t entity, long slots,
                                      const SlotClock& clock = SlotClock{}) {
  auto gen = entity_rng(seed, entity, "commercial-base");
  NormalSampler normal;
  const double scale = std::exp(0.35 * normal(gen));
  const double open = 7.5 + NormalSampler::uniform01(gen);
  const double close = 17.0 + 2.0 * NormalSampler::uniform01(gen);
  Series kw(static_cast<std::size_t>(std::max(0L, slots)));
  for (long k = 0; k < slots; ++k) {
    const double hour = (slot_of_day(k) + 0.5) * kSlotHours;
    const int dow = clock.day_of_week(k);
    const bool trading = dow < 5 || (dow == 5 && hour < 14.0);
    const double level = trading && hour >= open && hour < close ? 3.0 : 0.9;
    kw[static_cast<std::size_t>(k)] = scale * level * std::exp(0.1 * normal(gen) - 0.5 * 0.1 * 0.1);
  }
  return kw;
}

} // namespace fase::der
