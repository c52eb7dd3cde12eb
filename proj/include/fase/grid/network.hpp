#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fase/common/error.hpp"

namespace fase::grid {

using cplx = std::complex<double>;

enum class Phase : std::uint8_t { A = 0, B = 1, C = 2 };

inline constexpr Phase kPhases[] = {Phase::A, Phase::B, Phase::C};

inline char phase_char(Phase p) { return static_cast<char>('A' + static_cast<int>(p)); }

inline Phase parse_phase(char c) {
  switch (c) {
  case 'A': case 'a': case '1': return Phase::A;
  case 'B': case 'b': case '2': return Phase::B;
  case 'C': case 'c': case '3': return Phase::C;
  default: throw SchemaError(std::string("unknown phase '") + c + "'");
  }
}

inline Phase parse_phase(const std::string& s) {
  if (s.size() != 1)
    throw SchemaError("unknown phase '" + s + "'");
  return parse_phase(s[0]);
}

/// Subset of {A, B, C}.
class PhaseSet {
public:
  PhaseSet() = default;

  static PhaseSet parse(const std::string& s) {
    PhaseSet out;
    if (s.empty())
      throw SchemaError("empty phase set");
    for (char c : s) {
      const Phase p = parse_phase(c);
      if (out.contains(p))
        throw SchemaError("phase '" + std::string(1, c) + "' repeated in '" + s + "'");
      out.insert(p);
    }
    return out;
  }

  void insert(Phase p) { bits_ |= bit(p); }
  bool contains(Phase p) const { return (bits_ & bit(p)) != 0; }
  bool subset_of(PhaseSet o) const { return (bits_ & ~o.bits_) == 0; }
  bool empty() const { return bits_ == 0; }
  int size() const { return __builtin_popcount(bits_); }

  std::vector<Phase> list() const {
    std::vector<Phase> out;
    for (Phase p : kPhases)
      if (contains(p))
        out.push_back(p);
    return out;
  }

  std::string str() const {
    std::string s;
    for (Phase p : list())
      s += phase_char(p);
    return s;
  }

  bool operator==(const PhaseSet&) const = default;

private:
  static std::uint8_t bit(Phase p) { return static_cast<std::uint8_t>(1u << static_cast<int>(p)); }
  std::uint8_t bits_ = 0;
};

struct Bus {
  std::string id;
  PhaseSet phases;
  double kv_base = 0.0; ///< line-to-line kV
};

struct Branch {
  std::string from;
  std::string to;
  std::vector<Phase> phases;   ///< row/column order of the impedance blocks
  Eigen::MatrixXcd z_ohm;      ///< present phases only
  bool length_scaled = true;

  // Filled in by NetworkModel.
  Eigen::MatrixXcd z_pu;
  Eigen::MatrixXcd y_pu;

  int local(Phase p) const {
    for (std::size_t i = 0; i < phases.size(); ++i)
      if (phases[i] == p)
        return static_cast<int>(i);
    return -1;
  }
};

/// Constant-PQ wye load on one phase.
struct LoadSpec {
  std::string bus;
  Phase phase = Phase::A;
  double p_kw = 0.0;
  double pf = 1.0;

  double q_kvar() const { return q_from_p(p_kw, pf); }

  static double q_from_p(double p, double pf) { return p * std::tan(std::acos(pf)); }
};

struct SlackSource {
  std::string bus;
  double v_pu = 1.0;
  double ang_deg = 0.0;
};

/// Index pair identifying one energized phase of one bus.
struct NodeRef {
  int bus = 0;
  Phase phase = Phase::A;
  bool operator==(const NodeRef&) const = default;
};

/// Solved or estimated voltage at one bus-phase.
struct BusPhase {
  std::string bus_id;
  Phase phase = Phase::A;
  double voltage_mag = 0.0; ///< pu
  double voltage_ang = 0.0; ///< rad
};

/// Validated radial three-phase feeder.
///
/// Branches are re-oriented so that `from` is the bus nearer the slack. Nodes
/// (bus-phases) are numbered bus-major, phase-minor in file order of buses.
class NetworkModel {
public:
  NetworkModel(std::vector<Bus> buses, std::vector<Branch> branches, std::vector<LoadSpec> loads,
               SlackSource slack, double base_mva, std::string name = {})
      : name_(std::move(name)), buses_(std::move(buses)), branches_(std::move(branches)),
        loads_(std::move(loads)), slack_(std::move(slack)), base_mva_(base_mva) {
    validate_and_index();
  }

  const std::string& name() const { return name_; }
  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const std::vector<LoadSpec>& loads() const { return loads_; }
  const SlackSource& slack() const { return slack_; }
  double base_mva() const { return base_mva_; }
  double base_kv() const { return buses_[slack_index_].kv_base; }
  int slack_index() const { return slack_index_; }

  int bus_index(const std::string& id) const {
    auto it = bus_lookup_.find(id);
    if (it == bus_lookup_.end())
      throw DomainError("unknown bus '" + id + "'");
    return it->second;
  }
  bool has_bus(const std::string& id) const { return bus_lookup_.count(id) != 0; }

  int node_count() const { return static_cast<int>(nodes_.size()); }
  const NodeRef& node(int i) const { return nodes_[i]; }
  const std::vector<NodeRef>& nodes() const { return nodes_; }

  /// Node index of (bus, phase), or -1 if that phase is not energized.
  int node_index(int bus, Phase p) const { return node_of_[bus][static_cast<int>(p)]; }
  int node_index(const std::string& bus, Phase p) const {
    const int i = node_index(bus_index(bus), p);
    if (i < 0)
      throw DomainError("bus '" + bus + "' has no phase " + phase_char(p));
    return i;
  }

  std::string node_label(int node) const {
    return buses_[nodes_[node].bus].id + "." + std::to_string(static_cast<int>(nodes_[node].phase) + 1);
  }

  /// Buses in breadth-first order from the slack.
  const std::vector<int>& sweep_order() const { return order_; }
  /// Branch feeding a bus (-1 for the slack).
  int parent_branch(int bus) const { return parent_branch_[bus]; }
  const std::vector<int>& child_branches(int bus) const { return children_[bus]; }
  int from_index(int branch) const { return branch_from_[branch]; }
  int to_index(int branch) const { return branch_to_[branch]; }

  /// Branch joining two buses, with +1 if given in stored orientation, -1 if reversed.
  std::optional<std::pair<int, int>> find_branch(const std::string& a, const std::string& b) const {
    if (!has_bus(a) || !has_bus(b))
      return std::nullopt;
    const int ia = bus_index(a);
    const int ib = bus_index(b);
    for (std::size_t k = 0; k < branches_.size(); ++k) {
      if (branch_from_[k] == ia && branch_to_[k] == ib)
        return std::pair{static_cast<int>(k), 1};
      if (branch_from_[k] == ib && branch_to_[k] == ia)
        return std::pair{static_cast<int>(k), -1};
    }
    return std::nullopt;
  }

  cplx slack_voltage(Phase p) const {
    constexpr double deg = std::numbers::pi / 180.0;
    const double shift = p == Phase::A ? 0.0 : (p == Phase::B ? -120.0 : 120.0);
    return std::polar(slack_.v_pu, (slack_.ang_deg + shift) * deg);
  }

  double phase_power_base_kva() const { return base_mva_ * 1000.0 / 3.0; }
  double impedance_base_ohm(int bus) const {
    const double kv = buses_[bus].kv_base;
    return kv * kv / base_mva_;
  }
  double current_base_amp(int bus) const {
    return base_mva_ * 1000.0 / (std::sqrt(3.0) * buses_[bus].kv_base);
  }

  /// Per-node complex power demand (pu) of the snapshot loads in the file.
  std::vector<cplx> snapshot_demand_pu() const {
    std::vector<cplx> s(nodes_.size(), cplx{});
    const double sb = phase_power_base_kva();
    for (const auto& l : loads_)
      s[node_index(l.bus, l.phase)] += cplx{l.p_kw / sb, l.q_kvar() / sb};
    return s;
  }

  /// Nodes carrying at least one load entry, in node order.
  std::vector<int> loaded_nodes() const {
    std::vector<char> has(nodes_.size(), 0);
    for (const auto& l : loads_)
      has[node_index(l.bus, l.phase)] = 1;
    std::vector<int> out;
    for (std::size_t i = 0; i < has.size(); ++i)
      if (has[i])
        out.push_back(static_cast<int>(i));
    return out;
  }

  /// Aggregate power factor of the loads at a node (1 when unloaded).
  double node_power_factor(int node) const {
    double p = 0.0, q = 0.0;
    const auto& nr = nodes_[node];
    for (const auto& l : loads_)
      if (bus_index(l.bus) == nr.bus && l.phase == nr.phase) {
        p += l.p_kw;
        q += l.q_kvar();
      }
    const double s = std::hypot(p, q);
    return s > 0.0 ? std::abs(p) / s : 1.0;
  }

private:
  void validate_and_index();

  std::string name_;
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::vector<LoadSpec> loads_;
  SlackSource slack_;
  double base_mva_ = 1.0;

  int slack_index_ = -1;
  std::map<std::string, int> bus_lookup_;
  std::vector<NodeRef> nodes_;
  std::vector<std::array<int, 3>> node_of_;
  std::vector<int> order_;
  std::vector<int> parent_branch_;
  std::vector<std::vector<int>> children_;
  std::vector<int> branch_from_;
  std::vector<int> branch_to_;
};

inline void NetworkModel::validate_and_index() {
  if (!(base_mva_ > 0.0) || !std::isfinite(base_mva_))
    throw SchemaError("base_mva must be positive");
  if (buses_.empty())
    throw SchemaError("network has no buses");

  for (std::size_t i = 0; i < buses_.size(); ++i) {
    const auto& b = buses_[i];
    if (b.id.empty())
      throw SchemaError("buses[" + std::to_string(i) + "]: empty id");
    if (!bus_lookup_.emplace(b.id, static_cast<int>(i)).second)
      throw SchemaError("duplicate bus id '" + b.id + "'");
    if (b.phases.empty())
      throw SchemaError("bus '" + b.id + "' has no phases");
    if (!(b.kv_base > 0.0))
      throw SchemaError("bus '" + b.id + "': kv_base must be positive");
  }

  if (slack_.bus.empty() || !bus_lookup_.count(slack_.bus))
    throw TopologyError("no slack bus (slack.bus '" + slack_.bus + "' not found)");
  if (!(slack_.v_pu > 0.0))
    throw SchemaError("slack v_pu must be positive");
  slack_index_ = bus_lookup_.at(slack_.bus);

  node_of_.assign(buses_.size(), {-1, -1, -1});
  for (std::size_t i = 0; i < buses_.size(); ++i)
    for (Phase p : buses_[i].phases.list()) {
      node_of_[i][static_cast<int>(p)] = static_cast<int>(nodes_.size());
      nodes_.push_back({static_cast<int>(i), p});
    }

  // Adjacency and per-branch checks.
  std::vector<std::vector<std::pair<int, int>>> adj(buses_.size()); // (neighbour, branch)
  for (std::size_t k = 0; k < branches_.size(); ++k) {
    auto& br = branches_[k];
    const std::string ctx = "branch " + br.from + "-" + br.to;
    if (!bus_lookup_.count(br.from) || !bus_lookup_.count(br.to))
      throw TopologyError(ctx + ": references unknown bus");
    if (br.from == br.to)
      throw TopologyError(ctx + ": self loop (non-radial)");
    if (br.phases.empty())
      throw SchemaError(ctx + ": no phases");
    const int n = static_cast<int>(br.phases.size());
    if (br.z_ohm.rows() != n || br.z_ohm.cols() != n)
      throw SchemaError(ctx + ": impedance must be " + std::to_string(n) + "x" + std::to_string(n));
    const int f = bus_lookup_.at(br.from);
    const int t = bus_lookup_.at(br.to);
    for (Phase p : br.phases)
      if (!buses_[f].phases.contains(p) || !buses_[t].phases.contains(p))
        throw SchemaError(ctx + ": phase " + std::string(1, phase_char(p)) +
                          " not present at both ends");
    if (std::abs(buses_[f].kv_base - buses_[t].kv_base) > 1e-9 * buses_[f].kv_base)
      throw SchemaError(ctx + ": kv_base differs across the branch (transformers are not modelled)");
    br.z_pu = br.z_ohm / impedance_base_ohm(f);
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(br.z_pu);
    lu.setThreshold(1e-12);
    if (lu.rank() < n)
      throw SchemaError(ctx + ": singular phase impedance block");
    br.y_pu = lu.inverse();
    adj[f].push_back({t, static_cast<int>(k)});
    adj[t].push_back({f, static_cast<int>(k)});
  }

  // Breadth-first traversal from the slack; any revisit means a loop.
  parent_branch_.assign(buses_.size(), -1);
  children_.assign(buses_.size(), {});
  std::vector<char> seen(buses_.size(), 0);
  std::vector<char> used(branches_.size(), 0);
  order_.clear();
  order_.push_back(slack_index_);
  seen[slack_index_] = 1;
  for (std::size_t head = 0; head < order_.size(); ++head) {
    const int u = order_[head];
    for (auto [v, k] : adj[u]) {
      if (used[k])
        continue;
      used[k] = 1;
      if (seen[v])
        throw TopologyError("non-radial network: loop closes at bus '" + buses_[v].id + "'");
      seen[v] = 1;
      parent_branch_[v] = k;
      children_[u].push_back(k);
      if (branches_[k].from != buses_[u].id)
        std::swap(branches_[k].from, branches_[k].to);
      order_.push_back(v);
    }
  }
  for (std::size_t i = 0; i < buses_.size(); ++i)
    if (!seen[i])
      throw TopologyError("disconnected bus '" + buses_[i].id + "' (not reachable from slack)");

  branch_from_.resize(branches_.size());
  branch_to_.resize(branches_.size());
  for (std::size_t k = 0; k < branches_.size(); ++k) {
    branch_from_[k] = bus_lookup_.at(branches_[k].from);
    branch_to_[k] = bus_lookup_.at(branches_[k].to);
  }

  for (std::size_t i = 0; i < buses_.size(); ++i) {
    if (static_cast<int>(i) == slack_index_)
      continue;
    const auto& br = branches_[parent_branch_[i]];
    for (Phase p : buses_[i].phases.list())
      if (br.local(p) < 0)
        throw TopologyError("bus '" + buses_[i].id + "': phase " + std::string(1, phase_char(p)) +
                            " is not supplied by its parent branch");
  }

  for (std::size_t i = 0; i < loads_.size(); ++i) {
    const auto& l = loads_[i];
    const std::string ctx = "loads[" + std::to_string(i) + "]";
    if (!bus_lookup_.count(l.bus))
      throw SchemaError(ctx + ": unknown bus '" + l.bus + "'");
    if (!buses_[bus_lookup_.at(l.bus)].phases.contains(l.phase))
      throw SchemaError(ctx + ": bus '" + l.bus + "' has no phase " + std::string(1, phase_char(l.phase)));
    if (!(l.pf > 0.0 && l.pf <= 1.0))
      throw SchemaError(ctx + ": power factor must lie in (0, 1]");
    if (!std::isfinite(l.p_kw))
      throw SchemaError(ctx + ": p_kw must be finite");
  }
}

} // namespace fase::grid
