#pragma once

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "fase/common/csv.hpp"
#include "fase/common/error.hpp"
#include "fase/common/timeslot.hpp"
#include "fase/estimation/fase_runner.hpp"
#include "fase/estimation/state.hpp"
#include "fase/eval/metrics.hpp"
#include "fase/grid/bfs.hpp"
#include "fase/measure/truth.hpp"

namespace fase::eval {

/// File names inside a run's artifacts directory.
namespace files {
inline constexpr const char* weather = "weather.csv";
inline constexpr const char* demand = "demand.csv";
inline constexpr const char* profiles = "profiles.csv";
inline constexpr const char* truth = "truth.csv";
inline constexpr const char* truth_currents = "truth_currents.csv";
inline constexpr const char* channels = "channels.csv";
inline constexpr const char* measurements = "measurements.csv";
inline constexpr const char* availability = "availability.csv";
inline constexpr const char* features = "features";
inline constexpr const char* forecasts = "forecasts.csv";
inline constexpr const char* estimates = "estimates.csv";
inline constexpr const char* traces = "traces.csv";
inline constexpr const char* config = "run_config.json";
} // namespace files

inline constexpr double kDeg = 180.0 / std::numbers::pi;

inline std::string phase_str(Phase p) { return std::string(1, grid::phase_char(p)); }

/// Slot-indexed series keyed by bus-phase; every series covers [first, first + count).
struct NodeTable {
  long first = 0;
  long count = 0;
  std::map<ChannelKey, std::vector<double>> p;
  std::map<ChannelKey, std::vector<double>> q;
};

// ---- demand.csv: timestamp,bus,phase,p_kw,q_kvar

inline void write_demand(const std::string& path, const NodeTable& d, const SlotClock& clock) {
  csv::Writer w(path);
  w.row("timestamp", "bus", "phase", "p_kw", "q_kvar");
  for (long k = 0; k < d.count; ++k)
    for (const auto& [key, p] : d.p)
      w.row(clock.timestamp(d.first + k), key.bus, phase_str(key.phase), p[static_cast<std::size_t>(k)],
            d.q.at(key)[static_cast<std::size_t>(k)]);
}

namespace detail {

/// Collects rows of a slot-major file into complete per-key series.
template <class Row>
NodeTable read_slot_major(const csv::Table& t, const SlotClock& clock, Row&& row) {
  NodeTable d;
  std::map<ChannelKey, std::map<long, std::pair<double, double>>> raw;
  long lo = 0, hi = -1;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const long slot = clock.slot(t.rows[r][0]);
    const auto [key, a, b] = row(r);
    if (!raw[key].emplace(slot, std::make_pair(a, b)).second)
      throw SchemaError(t.source + " line " + std::to_string(r + 2) + ": duplicate row for " + key.label());
    if (hi < lo) {
      lo = hi = slot;
    } else {
      lo = std::min(lo, slot);
      hi = std::max(hi, slot);
    }
  }
  if (raw.empty())
    throw SchemaError(t.source + ": no rows");
  d.first = lo;
  d.count = hi - lo + 1;
  for (const auto& [key, series] : raw) {
    if (static_cast<long>(series.size()) != d.count)
      throw SchemaError(t.source + ": " + key.label() + " has " + std::to_string(series.size()) + " of " +
                        std::to_string(d.count) + " slots");
    auto& p = d.p[key];
    auto& q = d.q[key];
    for (const auto& [slot, v] : series) {
      p.push_back(v.first);
      q.push_back(v.second);
    }
  }
  return d;
}

} // namespace detail

inline NodeTable read_demand(const std::string& path, const SlotClock& clock) {
  const auto t = csv::read(path);
  csv::require_header(t, {"timestamp", "bus", "phase", "p_kw", "q_kvar"});
  return detail::read_slot_major(t, clock, [&](std::size_t r) {
    return std::tuple{ChannelKey{t.rows[r][1], grid::parse_phase(t.rows[r][2])}, t.number(r, 3), t.number(r, 4)};
  });
}

/// Per-node demand in pu for the power flow, one vector per slot of the table.
inline std::vector<std::vector<grid::cplx>> demand_pu(const grid::NetworkModel& net, const NodeTable& d) {
  const double base = net.phase_power_base_kva();
  std::vector<std::vector<grid::cplx>> out(static_cast<std::size_t>(d.count),
                                           std::vector<grid::cplx>(static_cast<std::size_t>(net.node_count())));
  for (const auto& [key, p] : d.p) {
    if (!net.has_bus(key.bus))
      throw SchemaError("demand: unknown bus '" + key.bus + "'");
    const int node = net.node_index(net.bus_index(key.bus), key.phase);
    if (node < 0)
      throw SchemaError("demand: bus '" + key.bus + "' has no phase " + phase_str(key.phase));
    const auto& q = d.q.at(key);
    for (long k = 0; k < d.count; ++k)
      out[static_cast<std::size_t>(k)][static_cast<std::size_t>(node)] = {p[static_cast<std::size_t>(k)] / base,
                                                                          q[static_cast<std::size_t>(k)] / base};
  }
  return out;
}

// ---- weather.csv: timestamp,ambient_c,irradiance_wm2

struct WeatherTable {
  long first = 0;
  std::vector<double> ambient_c;
  std::vector<double> irradiance_wm2;
};

inline void write_weather(const std::string& path, const WeatherTable& w, const SlotClock& clock) {
  csv::Writer out(path);
  out.row("timestamp", "ambient_c", "irradiance_wm2");
  for (std::size_t k = 0; k < w.ambient_c.size(); ++k)
    out.row(clock.timestamp(w.first + static_cast<long>(k)), w.ambient_c[k], w.irradiance_wm2[k]);
}

inline WeatherTable read_weather(const std::string& path, const SlotClock& clock) {
  const auto t = csv::read(path);
  csv::require_header(t, {"timestamp", "ambient_c", "irradiance_wm2"});
  WeatherTable w;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const long slot = clock.slot(t.rows[r][0]);
    if (r == 0)
      w.first = slot;
    else if (slot != w.first + static_cast<long>(r))
      throw SchemaError(path + " line " + std::to_string(r + 2) + ": slots must be consecutive");
    w.ambient_c.push_back(t.number(r, 1));
    w.irradiance_wm2.push_back(t.number(r, 2));
  }
  return w;
}

// ---- profiles.csv: timestamp,entity_id,category,p_kw (smart-meter households)

struct MeterTable {
  long first = 0;
  long count = 0;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> kw;
};

inline void write_meter_profiles(const std::string& path, const MeterTable& m, const SlotClock& clock) {
  csv::Writer w(path);
  w.row("timestamp", "entity_id", "category", "p_kw");
  for (long k = 0; k < m.count; ++k)
    for (std::size_t j = 0; j < m.ids.size(); ++j)
      w.row(clock.timestamp(m.first + k), m.ids[j], "smart_meter", m.kw[j][static_cast<std::size_t>(k)]);
}

inline MeterTable read_meter_profiles(const std::string& path, const SlotClock& clock) {
  const auto t = csv::read(path);
  csv::require_header(t, {"timestamp", "entity_id", "category", "p_kw"});
  MeterTable m;
  std::map<std::string, std::size_t> pos;
  std::vector<std::map<long, double>> raw;
  long lo = 0, hi = -1;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const long slot = clock.slot(t.rows[r][0]);
    const auto [it, fresh] = pos.emplace(t.rows[r][1], m.ids.size());
    if (fresh) {
      m.ids.push_back(t.rows[r][1]);
      raw.emplace_back();
    }
    if (!raw[it->second].emplace(slot, t.number(r, 3)).second)
      throw SchemaError(path + " line " + std::to_string(r + 2) + ": duplicate row for " + t.rows[r][1]);
    lo = hi < lo ? slot : std::min(lo, slot);
    hi = std::max(hi, slot);
  }
  m.first = lo;
  m.count = m.ids.empty() ? 0 : hi - lo + 1;
  for (std::size_t j = 0; j < raw.size(); ++j) {
    if (static_cast<long>(raw[j].size()) != m.count)
      throw SchemaError(path + ": meter " + m.ids[j] + " does not cover every slot");
    std::vector<double> kw;
    for (const auto& [slot, v] : raw[j])
      kw.push_back(v);
    m.kw.push_back(std::move(kw));
  }
  return m;
}

/// Bus-phase of a meter id "bus.N/mK".
inline ChannelKey meter_owner(const std::string& id) {
  const auto slash = id.find('/');
  if (slash == std::string::npos)
    throw SchemaError("meter id '" + id + "' must look like 'bus.N/mK'");
  try {
    return ChannelKey::parse(id.substr(0, slash));
  } catch (const ConfigError&) {
    throw SchemaError("meter id '" + id + "' must look like 'bus.N/mK'");
  }
}

// ---- truth.csv: timestamp,bus,phase,v_pu,ang_deg

inline void write_truth(const std::string& path, const grid::NetworkModel& net, const measure::TruthSeries& truth,
                        const SlotClock& clock) {
  csv::Writer w(path);
  w.row("timestamp", "bus", "phase", "v_pu", "ang_deg");
  for (long k = 0; k < truth.size(); ++k) {
    const long slot = truth.first_slot + k;
    const auto& v = truth.solutions[static_cast<std::size_t>(k)].voltage;
    for (int n = 0; n < net.node_count(); ++n)
      w.row(clock.timestamp(slot), net.buses()[net.node(n).bus].id, phase_str(net.node(n).phase), std::abs(v[n]),
            std::arg(v[n]) * kDeg);
  }
}

inline VoltageSeries read_truth(const std::string& path, const SlotClock& clock) {
  const auto t = csv::read(path);
  csv::require_header(t, {"timestamp", "bus", "phase", "v_pu", "ang_deg"});
  VoltageSeries out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const ChannelKey key{t.rows[r][1], grid::parse_phase(t.rows[r][2])};
    if (!out[key].emplace(clock.slot(t.rows[r][0]), VoltagePoint{t.number(r, 3), t.number(r, 4)}).second)
      throw SchemaError(path + " line " + std::to_string(r + 2) + ": duplicate row for " + key.label());
  }
  return out;
}

// ---- truth_currents.csv: timestamp,from,to,phase,i_amp_mag,i_amp_ang

inline void write_truth_currents(const std::string& path, const grid::NetworkModel& net,
                                 const measure::TruthSeries& truth, const SlotClock& clock) {
  csv::Writer w(path);
  w.row("timestamp", "from", "to", "phase", "i_amp_mag", "i_amp_ang");
  for (long k = 0; k < truth.size(); ++k) {
    const long slot = truth.first_slot + k;
    const auto& sol = truth.solutions[static_cast<std::size_t>(k)];
    for (const auto& br : net.branches())
      for (Phase p : br.phases) {
        const auto i = grid::branch_current(net, sol, br.from, br.to, p).amp;
        w.row(clock.timestamp(slot), br.from, br.to, phase_str(p), std::abs(i), std::arg(i) * kDeg);
      }
  }
}

/// Phase current magnitudes (pu) of one branch per slot, from truth_currents.csv.
inline std::map<long, std::array<double, 3>> read_branch_current_pu(const std::string& path,
                                                                    const grid::NetworkModel& net,
                                                                    const std::string& from, const std::string& to,
                                                                    const SlotClock& clock) {
  const auto t = csv::read(path);
  csv::require_header(t, {"timestamp", "from", "to", "phase", "i_amp_mag", "i_amp_ang"});
  if (!net.find_branch(from, to))
    throw ConfigError("unknown branch " + from + "->" + to);
  const double base = net.current_base_amp(net.bus_index(from));
  std::map<long, std::array<double, 3>> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (!((row[1] == from && row[2] == to) || (row[1] == to && row[2] == from)))
      continue;
    out[clock.slot(row[0])][static_cast<std::size_t>(grid::parse_phase(row[3]))] = t.number(r, 4) / base;
  }
  return out;
}

// ---- estimates.csv: timestamp,bus,phase,v_pu_est,ang_deg_est,v_pu_true,ang_deg_true

inline void write_estimates(const std::string& path, const grid::NetworkModel& net, const est::FaseTrace& trace,
                            const VoltageSeries& truth, const SlotClock& clock) {
  const est::StateLayout layout(net);
  csv::Writer w(path);
  w.row("timestamp", "bus", "phase", "v_pu_est", "ang_deg_est", "v_pu_true", "ang_deg_true");
  for (const auto& s : trace.slots) {
    const auto v = layout.to_voltages(s.x);
    for (int n = 0; n < net.node_count(); ++n) {
      const ChannelKey key{net.buses()[net.node(n).bus].id, net.node(n).phase};
      const auto ch = truth.find(key);
      if (ch == truth.end() || !ch->second.count(s.slot))
        throw SchemaError("truth has no value for " + key.label() + " at " + clock.timestamp(s.slot));
      const auto& t = ch->second.at(s.slot);
      w.row(clock.timestamp(s.slot), key.bus, phase_str(key.phase), std::abs(v[n]), std::arg(v[n]) * kDeg, t.v_pu,
            t.ang_deg);
    }
  }
}

/// Reads estimates.csv into (estimates, truth).
inline std::pair<VoltageSeries, VoltageSeries> read_estimates(const std::string& path, const SlotClock& clock) {
  const auto t = csv::read(path);
  csv::require_header(t, {"timestamp", "bus", "phase", "v_pu_est", "ang_deg_est", "v_pu_true", "ang_deg_true"});
  std::pair<VoltageSeries, VoltageSeries> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const ChannelKey key{t.rows[r][1], grid::parse_phase(t.rows[r][2])};
    const long slot = clock.slot(t.rows[r][0]);
    if (!out.first[key].emplace(slot, VoltagePoint{t.number(r, 3), t.number(r, 4)}).second)
      throw SchemaError(path + " line " + std::to_string(r + 2) + ": duplicate row for " + key.label());
    out.second[key].emplace(slot, VoltagePoint{t.number(r, 5), t.number(r, 6)});
  }
  return out;
}

// ---- traces.csv: timestamp,phase,alpha,beta,branch_rate

struct TraceRow {
  long slot = 0;
  Phase phase = Phase::A;
  double alpha = 0.0;
  double beta = 0.0;
  double branch_rate = 0.0;
};

inline void write_traces(const std::string& path, const est::FaseTrace& trace, const SlotClock& clock) {
  csv::Writer w(path);
  w.row("timestamp", "phase", "alpha", "beta", "branch_rate");
  for (const auto& s : trace.slots)
    for (int p = 0; p < 3; ++p)
      w.row(clock.timestamp(s.slot), phase_str(static_cast<Phase>(p)), s.params[static_cast<std::size_t>(p)].alpha,
            s.params[static_cast<std::size_t>(p)].beta, s.branch_rate[static_cast<std::size_t>(p)]);
}

inline std::vector<TraceRow> read_traces(const std::string& path, const SlotClock& clock) {
  const auto t = csv::read(path);
  csv::require_header(t, {"timestamp", "phase", "alpha", "beta", "branch_rate"});
  std::vector<TraceRow> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    out.push_back({clock.slot(t.rows[r][0]), grid::parse_phase(t.rows[r][1]), t.number(r, 2), t.number(r, 3),
                   t.number(r, 4)});
  return out;
}

} // namespace fase::eval
