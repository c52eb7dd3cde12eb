#pragma once

#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "fase/common/csv.hpp"
#include "fase/common/error.hpp"
#include "fase/grid/network.hpp"

namespace fase::eval {

using grid::Phase;

/// Bus-phase key in "bus.N" notation (N = 1, 2, 3 for phases A, B, C).
struct ChannelKey {
  std::string bus;
  Phase phase = Phase::A;

  std::string label() const { return bus + "." + std::to_string(static_cast<int>(phase) + 1); }
  static ChannelKey parse(const std::string& s) {
    const auto dot = s.rfind('.');
    if (dot == std::string::npos || dot + 2 != s.size() || s[dot + 1] < '1' || s[dot + 1] > '3')
      throw ConfigError("bus-phase '" + s + "' must look like 'bus.N' with N in 1..3");
    return {s.substr(0, dot), static_cast<Phase>(s[dot + 1] - '1')};
  }
  auto tie() const { return std::tie(bus, phase); }
  bool operator<(const ChannelKey& o) const { return tie() < o.tie(); }
  bool operator==(const ChannelKey& o) const { return tie() == o.tie(); }
};

/// Voltage phasor samples per bus-phase: slot -> (|V| pu, angle deg).
struct VoltagePoint {
  double v_pu = 0.0;
  double ang_deg = 0.0;
};
using VoltageSeries = std::map<ChannelKey, std::map<long, VoltagePoint>>;

struct ErrorStats {
  double mae = 0.0;
  double rmse = 0.0;
  double mse = 0.0;
  long samples = 0;
};

/// Standard error statistics of one sample of errors.
inline ErrorStats error_stats(const std::vector<double>& e) {
  if (e.empty())
    throw DomainError("error statistics of an empty sample");
  ErrorStats s;
  for (double v : e) {
    s.mae += std::abs(v);
    s.mse += v * v;
  }
  s.samples = static_cast<long>(e.size());
  s.mae /= static_cast<double>(e.size());
  s.mse /= static_cast<double>(e.size());
  s.rmse = std::sqrt(s.mse);
  return s;
}

/// Angle difference wrapped to (-180, 180].
inline double angle_diff_deg(double a, double b) {
  double d = std::remainder(a - b, 360.0);
  if (d <= -180.0)
    d += 360.0;
  return d;
}

struct ChannelMetrics {
  ChannelKey key;
  ErrorStats v_mag; ///< pu
  ErrorStats v_ang; ///< degrees
};

struct ForecastMetrics {
  ChannelKey key;
  ErrorStats p_kw;
};

struct MetricsReport {
  std::vector<ChannelMetrics> channels;
  ErrorStats aggregate_v_mag; ///< mean of the per-channel statistics
  ErrorStats aggregate_v_ang;
  std::vector<ForecastMetrics> forecaster;
  ErrorStats aggregate_forecaster;
  /// Wall-clock seconds per stage; only serialized when non-empty.
  std::map<std::string, double> runtime_s;
};

namespace detail {

inline ErrorStats mean_of(const std::vector<ErrorStats>& v) {
  ErrorStats a;
  if (v.empty())
    return a;
  for (const auto& s : v) {
    a.mae += s.mae;
    a.rmse += s.rmse;
    a.mse += s.mse;
    a.samples += s.samples;
  }
  const auto n = static_cast<double>(v.size());
  a.mae /= n;
  a.rmse /= n;
  a.mse /= n;
  return a;
}

} // namespace detail

/// Per bus-phase voltage error statistics over the slots both series share.
/// Every estimated channel must exist in the truth; a channel with no common
/// slot is a misalignment.
inline MetricsReport compute_metrics(const VoltageSeries& estimates, const VoltageSeries& truth) {
  if (estimates.empty())
    throw DomainError("compute_metrics: no estimates");
  MetricsReport r;
  std::vector<ErrorStats> mags, angs;
  for (const auto& [key, est] : estimates) {
    const auto t = truth.find(key);
    if (t == truth.end())
      throw DomainError("compute_metrics: no truth for " + key.label());
    std::vector<double> em, ea;
    for (const auto& [slot, e] : est) {
      const auto tv = t->second.find(slot);
      if (tv == t->second.end())
        continue;
      em.push_back(e.v_pu - tv->second.v_pu);
      ea.push_back(angle_diff_deg(e.ang_deg, tv->second.ang_deg));
    }
    if (em.empty())
      throw DomainError("compute_metrics: estimates and truth share no slot for " + key.label());
    r.channels.push_back({key, error_stats(em), error_stats(ea)});
    mags.push_back(r.channels.back().v_mag);
    angs.push_back(r.channels.back().v_ang);
  }
  r.aggregate_v_mag = detail::mean_of(mags);
  r.aggregate_v_ang = detail::mean_of(angs);
  return r;
}

/// Adds forecaster error statistics: forecasts and actual demand, kW per slot.
inline void add_forecaster_metrics(MetricsReport& r, const std::map<ChannelKey, std::map<long, double>>& forecast,
                                   const std::map<ChannelKey, std::map<long, double>>& actual) {
  std::vector<ErrorStats> all;
  for (const auto& [key, f] : forecast) {
    const auto a = actual.find(key);
    if (a == actual.end())
      throw DomainError("forecaster metrics: no demand for " + key.label());
    std::vector<double> e;
    for (const auto& [slot, v] : f) {
      const auto av = a->second.find(slot);
      if (av != a->second.end())
        e.push_back(v - av->second);
    }
    if (e.empty())
      throw DomainError("forecaster metrics: forecasts and demand share no slot for " + key.label());
    r.forecaster.push_back({key, error_stats(e)});
    all.push_back(r.forecaster.back().p_kw);
  }
  r.aggregate_forecaster = detail::mean_of(all);
}

inline nlohmann::ordered_json stats_json(const ErrorStats& s) {
  return {{"mae", s.mae}, {"rmse", s.rmse}, {"mse", s.mse}, {"samples", s.samples}};
}

inline nlohmann::ordered_json metrics_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["units"] = {{"v_mag", "pu"}, {"v_ang", "deg"}, {"forecaster", "kW"}};
  j["aggregate"] = {{"v_mag", stats_json(r.aggregate_v_mag)}, {"v_ang", stats_json(r.aggregate_v_ang)}};
  if (!r.forecaster.empty())
    j["aggregate"]["forecaster"] = stats_json(r.aggregate_forecaster);
  auto& ch = j["channels"] = nlohmann::ordered_json::array();
  for (const auto& c : r.channels)
    ch.push_back({{"bus_phase", c.key.label()}, {"v_mag", stats_json(c.v_mag)}, {"v_ang", stats_json(c.v_ang)}});
  if (!r.forecaster.empty()) {
    auto& fc = j["forecaster"] = nlohmann::ordered_json::array();
    for (const auto& f : r.forecaster)
      fc.push_back({{"bus_phase", f.key.label()}, {"p_kw", stats_json(f.p_kw)}});
  }
  if (!r.runtime_s.empty())
    j["runtime_s"] = r.runtime_s;
  return j;
}

/// metrics.json and metrics.csv (`scope,bus_phase,quantity,unit,mae,rmse,mse,samples`).
inline void write_metrics(const std::string& dir, const MetricsReport& r) {
  {
    std::ofstream out(dir + "/metrics.json");
    if (!out)
      throw Error("cannot write '" + dir + "/metrics.json'");
    out << metrics_json(r).dump(2) << '\n';
  }
  csv::Writer w(dir + "/metrics.csv");
  w.row("scope", "bus_phase", "quantity", "unit", "mae", "rmse", "mse", "samples");
  auto put = [&](const char* scope, const std::string& id, const char* q, const char* unit, const ErrorStats& s) {
    w.row(std::string(scope), id, std::string(q), std::string(unit), s.mae, s.rmse, s.mse, s.samples);
  };
  put("aggregate", "all", "v_mag", "pu", r.aggregate_v_mag);
  put("aggregate", "all", "v_ang", "deg", r.aggregate_v_ang);
  if (!r.forecaster.empty())
    put("aggregate", "all", "p_kw", "kW", r.aggregate_forecaster);
  for (const auto& c : r.channels) {
    put("channel", c.key.label(), "v_mag", "pu", c.v_mag);
    put("channel", c.key.label(), "v_ang", "deg", c.v_ang);
  }
  for (const auto& f : r.forecaster)
    put("forecaster", f.key.label(), "p_kw", "kW", f.p_kw);
}

} // namespace fase::eval
