#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fase/common/error.hpp"
#include "fase/der/scenario.hpp"
#include "fase/grid/bfs.hpp"

namespace fase::measure {

using grid::cplx;

/// Per-slot node demand (pu, node order); returns an empty vector for a slot it cannot supply.
using DemandSource = std::function<std::vector<cplx>(long slot)>;

struct TruthSeries {
  long first_slot = 0;
  std::vector<grid::PowerFlowSolution> solutions;

  long size() const { return static_cast<long>(solutions.size()); }
  const grid::PowerFlowSolution& at(long slot) const {
    if (slot < first_slot || slot >= first_slot + size())
      throw DomainError("truth: slot " + std::to_string(slot) + " outside [" + std::to_string(first_slot) + ", " +
                        std::to_string(first_slot + size()) + ")");
    return solutions[static_cast<std::size_t>(slot - first_slot)];
  }
};

/// One BFS solution per slot in [first, first + count), each warm-started from the previous one.
inline TruthSeries generate_truth(const grid::NetworkModel& net, const DemandSource& demand, long first, long count,
                                  const grid::PowerFlowOptions& opt = {}) {
  if (count < 1)
    throw DomainError("generate_truth: slot count must be at least 1");
  TruthSeries out;
  out.first_slot = first;
  out.solutions.reserve(static_cast<std::size_t>(count));
  for (long k = first; k < first + count; ++k) {
    const auto s = demand(k);
    if (s.empty())
      throw SchemaError("generate_truth: demand missing for slot " + std::to_string(k));
    if (static_cast<int>(s.size()) != net.node_count())
      throw SchemaError("generate_truth: demand for slot " + std::to_string(k) + " has " + std::to_string(s.size()) +
                        " entries, network has " + std::to_string(net.node_count()) + " bus-phases");
    std::span<const cplx> warm;
    if (!out.solutions.empty())
      warm = out.solutions.back().voltage;
    try {
      out.solutions.push_back(grid::bfs_power_flow(net, s, opt, warm));
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("slot " + std::to_string(k) + ": " + e.what());
    }
  }
  return out;
}

/// Demand source over explicit per-slot vectors, slot k at index k - first.
inline DemandSource demand_from_series(std::vector<std::vector<cplx>> series, long first = 0) {
  return [series = std::move(series), first](long k) {
    if (k < first || k - first >= static_cast<long>(series.size()))
      return std::vector<cplx>{};
    return series[static_cast<std::size_t>(k - first)];
  };
}

/// Demand source over a generated scenario; the caller keeps `scenario` alive.
inline DemandSource demand_from_scenario(const grid::NetworkModel& net, const der::ScenarioDemand& scenario) {
  return [&net, &scenario](long k) {
    if (k < 0 || k >= scenario.slots)
      return std::vector<cplx>{};
    return scenario.demand_pu(net, k);
  };
}

} // namespace fase::measure
