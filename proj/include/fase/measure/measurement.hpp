#pragma once

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include "fase/common/error.hpp"
#include "fase/grid/network.hpp"

namespace fase::measure {

using grid::Phase;

enum class Kind {
  voltage_mag,
  voltage_ang,
  power_flow_p,
  power_flow_q,
  branch_current_mag,
  pseudo_injection_p,
  pseudo_injection_q,
};

inline const char* kind_name(Kind k) {
  switch (k) {
  case Kind::voltage_mag: return "voltage_mag";
  case Kind::voltage_ang: return "voltage_ang";
  case Kind::power_flow_p: return "power_flow_p";
  case Kind::power_flow_q: return "power_flow_q";
  case Kind::branch_current_mag: return "branch_current_mag";
  case Kind::pseudo_injection_p: return "pseudo_injection_p";
  case Kind::pseudo_injection_q: return "pseudo_injection_q";
  }
  return "?";
}

inline Kind parse_kind(const std::string& s) {
  for (Kind k : {Kind::voltage_mag, Kind::voltage_ang, Kind::power_flow_p, Kind::power_flow_q,
                 Kind::branch_current_mag, Kind::pseudo_injection_p, Kind::pseudo_injection_q})
    if (s == kind_name(k))
      return k;
  throw SchemaError("unknown measurement kind '" + s + "'");
}

inline bool is_branch_kind(Kind k) {
  return k == Kind::power_flow_p || k == Kind::power_flow_q || k == Kind::branch_current_mag;
}

/// Bus-phase, or branch-phase when `to_bus` is set (flows are metered at `bus`).
struct Location {
  std::string bus;
  std::string to_bus;
  Phase phase = Phase::A;

  /// "bus" or "from->to", as written in the measurement stream.
  std::string label() const { return to_bus.empty() ? bus : bus + "->" + to_bus; }

  static Location parse(const std::string& label, Phase p) {
    const auto arrow = label.find("->");
    if (arrow == std::string::npos)
      return {label, {}, p};
    return {label.substr(0, arrow), label.substr(arrow + 2), p};
  }

  auto key() const { return std::tie(bus, to_bus, phase); }
  bool operator==(const Location& o) const { return key() == o.key(); }
  bool operator<(const Location& o) const { return key() < o.key(); }
};

/// Values are per-unit (voltages, powers, currents) and radians (angles).
struct MeasurementSpec {
  Kind kind = Kind::voltage_mag;
  Location location;
  double sigma = 0.0;

  bool same_channel(const MeasurementSpec& o) const { return kind == o.kind && location == o.location; }
};

enum class Origin { real_time, pseudo, virtual_zero };

struct Measurement {
  MeasurementSpec spec;
  double value = 0.0;
  double variance = 0.0;
  Origin origin = Origin::real_time;
};

struct MeasurementSet {
  long slot = 0;
  std::vector<Measurement> entries;
};

/// Checks that a spec refers to an existing element of the network.
inline void validate_spec(const grid::NetworkModel& net, const MeasurementSpec& s) {
  if (!(s.sigma > 0.0))
    throw DomainError("measurement " + std::string(kind_name(s.kind)) + " at " + s.location.label() +
                      ": sigma must be positive");
  const auto& loc = s.location;
  if (is_branch_kind(s.kind)) {
    const auto br = net.find_branch(loc.bus, loc.to_bus);
    if (!br)
      throw DomainError("measurement " + std::string(kind_name(s.kind)) + ": unknown branch " + loc.label());
    if (net.branches()[br->first].local(loc.phase) < 0)
      throw DomainError("measurement at " + loc.label() + ": branch has no phase " +
                        std::string(1, grid::phase_char(loc.phase)));
  } else {
    if (!loc.to_bus.empty())
      throw DomainError("measurement " + std::string(kind_name(s.kind)) + " must name a bus, not a branch");
    net.node_index(loc.bus, loc.phase); // throws if absent
  }
}

} // namespace fase::measure
