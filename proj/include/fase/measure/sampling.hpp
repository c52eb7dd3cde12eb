#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fase/common/error.hpp"
#include "fase/common/rng.hpp"
#include "fase/grid/bfs.hpp"
#include "fase/measure/measurement.hpp"

namespace fase::measure {

using grid::cplx;

/// A metered quantity without its noise level.
struct Channel {
  Kind kind = Kind::voltage_mag;
  Location location;

  bool operator==(const Channel& o) const { return kind == o.kind && location == o.location; }
};

/// Standard deviations of the simulated instruments. Relative entries are
/// fractions of the true reading, bounded below by the matching floor.
struct NoiseProfile {
  double v_mag = 0.005;  ///< pu
  double v_ang = 0.005;  ///< rad
  double flow_rel = 0.01;
  double flow_floor = 1e-3; ///< pu
  double current_rel = 0.01;
  double current_floor = 1e-3; ///< pu
  double pseudo_rel = 0.10;
  double pseudo_floor = 1e-4; ///< pu
  double virtual_sigma = 1e-6;

  void validate() const {
    for (double v : {v_mag, v_ang, flow_rel, flow_floor, current_rel, current_floor, pseudo_rel, pseudo_floor,
                     virtual_sigma})
      if (!(v > 0.0))
        throw ConfigError("noise profile: every standard deviation and floor must be positive");
  }

  double sigma(Kind k, double truth) const {
    switch (k) {
    case Kind::voltage_mag: return v_mag;
    case Kind::voltage_ang: return v_ang;
    case Kind::power_flow_p:
    case Kind::power_flow_q: return std::max(flow_rel * std::abs(truth), flow_floor);
    case Kind::branch_current_mag: return std::max(current_rel * std::abs(truth), current_floor);
    case Kind::pseudo_injection_p:
    case Kind::pseudo_injection_q: return std::max(pseudo_rel * std::abs(truth), pseudo_floor);
    }
    return v_mag;
  }
};

namespace detail {

inline cplx outgoing_current(const grid::NetworkModel& net, const grid::PowerFlowSolution& sol, int bus, int branch,
                             Phase p) {
  const int other = net.from_index(branch) == bus ? net.to_index(branch) : net.from_index(branch);
  return grid::branch_current(net, sol, net.buses()[bus].id, net.buses()[other].id, p).pu;
}

} // namespace detail

/// Noise-free value of a channel in a power-flow solution (pu, rad). Flows are
/// metered at `location.bus`; injections count generation as positive.
inline double true_value(const grid::NetworkModel& net, const grid::PowerFlowSolution& sol, const Channel& c) {
  const auto& l = c.location;
  switch (c.kind) {
  case Kind::voltage_mag: return std::abs(sol.voltage[net.node_index(l.bus, l.phase)]);
  case Kind::voltage_ang: return std::arg(sol.voltage[net.node_index(l.bus, l.phase)]);
  case Kind::power_flow_p:
  case Kind::power_flow_q:
  case Kind::branch_current_mag: {
    const cplx i = grid::branch_current(net, sol, l.bus, l.to_bus, l.phase).pu;
    if (c.kind == Kind::branch_current_mag)
      return std::abs(i);
    const cplx s = sol.voltage[net.node_index(l.bus, l.phase)] * std::conj(i);
    return c.kind == Kind::power_flow_p ? s.real() : s.imag();
  }
  case Kind::pseudo_injection_p:
  case Kind::pseudo_injection_q: {
    const int bus = net.bus_index(l.bus);
    cplx i{};
    std::vector<int> incident = net.child_branches(bus);
    if (net.parent_branch(bus) >= 0)
      incident.push_back(net.parent_branch(bus));
    for (int k : incident)
      if (net.branches()[k].local(l.phase) >= 0)
        i += detail::outgoing_current(net, sol, bus, k, l.phase);
    const cplx s = sol.voltage[net.node_index(l.bus, l.phase)] * std::conj(i);
    return c.kind == Kind::pseudo_injection_p ? s.real() : s.imag();
  }
  }
  return 0.0;
}

/// Attaches the profile's standard deviation to each channel for this solution.
inline std::vector<MeasurementSpec> realize_specs(const grid::NetworkModel& net, const grid::PowerFlowSolution& sol,
                                                  const std::vector<Channel>& channels, const NoiseProfile& noise) {
  std::vector<MeasurementSpec> out;
  out.reserve(channels.size());
  for (const auto& c : channels)
    out.push_back({c.kind, c.location, noise.sigma(c.kind, true_value(net, sol, c))});
  return out;
}

/// z = h(truth) + N(0, sigma^2) per spec. The stream depends only on (seed, slot).
inline MeasurementSet sample_measurements(const grid::NetworkModel& net, const grid::PowerFlowSolution& sol,
                                          const std::vector<MeasurementSpec>& specs, std::uint64_t seed, long slot) {
  auto gen = entity_rng(seed, static_cast<std::uint64_t>(slot), "measurement-noise");
  NormalSampler normal;
  MeasurementSet set;
  set.slot = slot;
  set.entries.reserve(specs.size());
  for (const auto& s : specs) {
    validate_spec(net, s);
    const double t = true_value(net, sol, {s.kind, s.location});
    set.entries.push_back({s, t + s.sigma * normal(gen), s.sigma * s.sigma, Origin::real_time});
  }
  return set;
}

/// Three-phase real-time profile: voltage magnitude and angle at `substation`,
/// P and Q on each of `flow_branches` (metered at the upstream end), and
/// current magnitude on `current_branch` for `current_phases`.
inline std::vector<Channel> real_time_profile(const grid::NetworkModel& net, const std::string& substation,
                                              const std::vector<std::pair<std::string, std::string>>& flow_branches,
                                              const std::pair<std::string, std::string>& current_branch,
                                              const std::vector<Phase>& current_phases) {
  std::vector<Channel> out;
  const auto& bus = net.buses()[net.bus_index(substation)];
  for (Kind k : {Kind::voltage_mag, Kind::voltage_ang})
    for (Phase p : bus.phases.list())
      out.push_back({k, {substation, {}, p}});
  auto phases_of = [&](const std::string& a, const std::string& b) {
    const auto br = net.find_branch(a, b);
    if (!br)
      throw ConfigError("real-time profile: unknown branch " + a + "->" + b);
    return net.branches()[br->first].phases;
  };
  for (const auto& [a, b] : flow_branches)
    for (Kind k : {Kind::power_flow_p, Kind::power_flow_q})
      for (Phase p : phases_of(a, b))
        out.push_back({k, {a, b, p}});
  if (!current_branch.first.empty()) {
    const auto phases = phases_of(current_branch.first, current_branch.second);
    for (Phase p : current_phases) {
      if (std::find(phases.begin(), phases.end(), p) == phases.end())
        throw ConfigError("real-time profile: current branch has no phase " + std::string(1, grid::phase_char(p)));
      out.push_back({Kind::branch_current_mag, {current_branch.first, current_branch.second, p}});
    }
  }
  return out;
}

/// Virtual zero-injection channels (P and Q) at every non-slack node without demand.
inline std::vector<MeasurementSpec> virtual_zero_specs(const grid::NetworkModel& net,
                                                       const std::vector<int>& demand_nodes, double sigma) {
  std::vector<char> loaded(static_cast<std::size_t>(net.node_count()), 0);
  for (int n : demand_nodes)
    loaded[static_cast<std::size_t>(n)] = 1;
  std::vector<MeasurementSpec> out;
  for (int n = 0; n < net.node_count(); ++n) {
    const auto& nr = net.node(n);
    if (nr.bus == net.slack_index() || loaded[static_cast<std::size_t>(n)])
      continue;
    const std::string& id = net.buses()[nr.bus].id;
    out.push_back({Kind::pseudo_injection_p, {id, {}, nr.phase}, sigma});
    out.push_back({Kind::pseudo_injection_q, {id, {}, nr.phase}, sigma});
  }
  return out;
}

struct AvailabilityModel {
  double p = 0.4;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(p >= 0.0 && p <= 1.0))
      throw ConfigError("availability probability must lie in [0, 1]");
  }
};

/// Bernoulli(p) draw for one meter in one slot, from a counter-based hash of
/// (seed, meter, slot), so draws never depend on which other meters are queried.
inline bool meter_available(const AvailabilityModel& m, const std::string& meter_id, long slot) {
  const std::uint64_t h =
      splitmix64(splitmix64(m.seed ^ 0x5bd1e9955bd1e995ULL) ^ splitmix64(hash_label(meter_id)) ^
                 splitmix64(static_cast<std::uint64_t>(slot) * 0x9e3779b97f4a7c15ULL + 1));
  return static_cast<double>(h >> 11) * 0x1.0p-53 < m.p;
}

inline std::vector<std::string> sample_smart_meters(const std::vector<std::string>& meter_ids,
                                                    const AvailabilityModel& m, long slot) {
  m.validate();
  std::vector<std::string> out;
  for (const auto& id : meter_ids)
    if (meter_available(m, id, slot))
      out.push_back(id);
  return out;
}

/// Identifier of the k-th smart meter at a node, e.g. "671.2/m3".
inline std::string meter_id(const grid::NetworkModel& net, int node, int k) {
  return net.node_label(node) + "/m" + std::to_string(k);
}

} // namespace fase::measure
