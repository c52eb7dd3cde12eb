#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fase/grid/network.hpp"

namespace fase::grid {

struct PowerFlowOptions {
  double tol = 1e-8; ///< pu, applied to both voltage update and power mismatch
  int max_iter = 100;
};

struct PowerFlowSolution {
  std::vector<cplx> voltage;                ///< per node, pu
  std::vector<Eigen::VectorXcd> current;    ///< per branch, in branch phase order, pu (from -> to)
  int iterations = 0;
  double max_mismatch = 0.0;                ///< pu power
  double max_voltage_step = 0.0;            ///< pu, last iteration
  bool converged = false;

  std::vector<BusPhase> bus_phases(const NetworkModel& net) const {
    std::vector<BusPhase> out;
    out.reserve(voltage.size());
    for (int i = 0; i < net.node_count(); ++i)
      out.push_back({net.buses()[net.node(i).bus].id, net.node(i).phase, std::abs(voltage[i]),
                     std::arg(voltage[i])});
    return out;
  }
};

/// Radial backward/forward sweep with constant-PQ loads.
///
/// `demand` holds the complex power consumed at every node (pu, node order).
/// Each iteration converts demand to currents at the present voltages,
/// accumulates branch currents leaf-to-root and updates voltages root-to-leaf.
/// Convergence requires both the voltage update and the nodal power mismatch
/// at the new voltages to fall below `tol`.
inline PowerFlowSolution bfs_power_flow(const NetworkModel& net, std::span<const cplx> demand,
                                        const PowerFlowOptions& opt = {},
                                        std::span<const cplx> initial = {}) {
  const int n = net.node_count();
  if (static_cast<int>(demand.size()) != n)
    throw DomainError("bfs_power_flow: demand has " + std::to_string(demand.size()) +
                      " entries, network has " + std::to_string(n) + " bus-phases");
  if (!(opt.tol > 0.0))
    throw DomainError("bfs_power_flow: tol must be positive");
  if (opt.max_iter < 1)
    throw DomainError("bfs_power_flow: max_iter must be at least 1");

  const auto& branches = net.branches();
  const auto& order = net.sweep_order();

  PowerFlowSolution sol;
  sol.voltage.resize(n);
  if (!initial.empty()) {
    if (static_cast<int>(initial.size()) != n)
      throw DomainError("bfs_power_flow: initial profile size mismatch");
    sol.voltage.assign(initial.begin(), initial.end());
  } else {
    for (int i = 0; i < n; ++i)
      sol.voltage[i] = net.slack_voltage(net.node(i).phase);
  }
  for (Phase p : net.buses()[net.slack_index()].phases.list())
    sol.voltage[net.node_index(net.slack_index(), p)] = net.slack_voltage(p);

  sol.current.resize(branches.size());
  for (std::size_t k = 0; k < branches.size(); ++k)
    sol.current[k] = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(branches[k].phases.size()));

  std::vector<cplx> load_current(n);
  for (int it = 1; it <= opt.max_iter; ++it) {
    for (int i = 0; i < n; ++i)
      load_current[i] = demand[i] == cplx{} ? cplx{} : std::conj(demand[i] / sol.voltage[i]);

    // Backward: branch current = load at its receiving bus + everything downstream.
    for (auto r = order.rbegin(); r != order.rend(); ++r) {
      const int bus = *r;
      const int k = net.parent_branch(bus);
      if (k < 0)
        continue;
      const auto& br = branches[k];
      auto& j = sol.current[k];
      for (std::size_t m = 0; m < br.phases.size(); ++m) {
        const int node = net.node_index(bus, br.phases[m]);
        j[m] = node >= 0 ? load_current[node] : cplx{};
      }
      for (int c : net.child_branches(bus)) {
        const auto& cb = branches[c];
        for (std::size_t m = 0; m < cb.phases.size(); ++m)
          j[br.local(cb.phases[m])] += sol.current[c][m];
      }
    }

    // Forward: receiving voltage = sending voltage minus the branch drop.
    double step = 0.0;
    for (int bus : order) {
      const int k = net.parent_branch(bus);
      if (k < 0)
        continue;
      const auto& br = branches[k];
      const int from = net.from_index(k);
      const Eigen::VectorXcd drop = br.z_pu * sol.current[k];
      for (std::size_t m = 0; m < br.phases.size(); ++m) {
        const int nf = net.node_index(from, br.phases[m]);
        const int nt = net.node_index(bus, br.phases[m]);
        if (nt < 0)
          continue;
        const cplx v = sol.voltage[nf] - drop[m];
        step = std::max(step, std::abs(v - sol.voltage[nt]));
        sol.voltage[nt] = v;
      }
    }

    // Branch currents satisfy Ohm's law at the new voltages by construction, so
    // the nodal mismatch reduces to the loads evaluated at the new voltages.
    double mismatch = 0.0;
    bool finite = true;
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(sol.voltage[i].real()) || !std::isfinite(sol.voltage[i].imag()) ||
          std::abs(sol.voltage[i]) < 1e-6)
        finite = false;
      mismatch = std::max(mismatch, std::abs(sol.voltage[i] * std::conj(load_current[i]) - demand[i]));
    }
    if (!finite)
      throw ConvergenceError("bfs_power_flow: voltage collapse at iteration " + std::to_string(it) +
                             " (loading infeasible)");
    sol.iterations = it;
    sol.max_mismatch = mismatch;
    sol.max_voltage_step = step;
    if (mismatch < opt.tol && step < opt.tol) {
      sol.converged = true;
      return sol;
    }
  }
  throw ConvergenceError("bfs_power_flow: no convergence after " + std::to_string(opt.max_iter) +
                         " iterations (mismatch " + std::to_string(sol.max_mismatch) + " pu)");
}

struct BranchCurrent {
  cplx pu;
  cplx amp;
};

/// Phase current flowing from `from` towards `to`.
inline BranchCurrent branch_current(const NetworkModel& net, const PowerFlowSolution& sol,
                                    const std::string& from, const std::string& to, Phase p) {
  const auto found = net.find_branch(from, to);
  if (!found)
    throw DomainError("unknown branch " + from + "-" + to);
  const auto [k, sign] = *found;
  const int m = net.branches()[k].local(p);
  if (m < 0)
    throw DomainError("branch " + from + "-" + to + " has no phase " + std::string(1, phase_char(p)));
  const cplx i = static_cast<double>(sign) * sol.current[k][m];
  return {i, i * net.current_base_amp(net.from_index(k))};
}

/// Complex power supplied by the source on each phase (pu): flow into the
/// slack's outgoing branches plus any demand connected at the slack bus.
inline std::array<cplx, 3> slack_injection(const NetworkModel& net, const PowerFlowSolution& sol,
                                           std::span<const cplx> demand) {
  std::array<cplx, 3> s{};
  const int slack = net.slack_index();
  for (int k : net.child_branches(slack)) {
    const auto& br = net.branches()[k];
    for (std::size_t m = 0; m < br.phases.size(); ++m) {
      const int node = net.node_index(slack, br.phases[m]);
      s[static_cast<int>(br.phases[m])] += sol.voltage[node] * std::conj(sol.current[k][m]);
    }
  }
  for (Phase p : net.buses()[slack].phases.list())
    s[static_cast<int>(p)] += demand[net.node_index(slack, p)];
  return s;
}

} // namespace fase::grid
