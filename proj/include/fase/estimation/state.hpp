#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fase/common/error.hpp"
#include "fase/grid/network.hpp"

namespace fase::est {

using grid::cplx;
using grid::NetworkModel;
using grid::Phase;

/// Maps bus-phase voltages onto the estimated state vector.
///
/// Layout: all non-slack angles first, then all magnitudes, both in node order
/// (bus-major, phase-minor). Slack angles are references and not estimated.
class StateLayout {
public:
  explicit StateLayout(const NetworkModel& net) : net_(&net) {
    const int n = net.node_count();
    angle_slot_.assign(n, -1);
    mag_slot_.assign(n, -1);
    for (int i = 0; i < n; ++i)
      if (net.node(i).bus != net.slack_index())
        angle_slot_[i] = angles_++;
    for (int i = 0; i < n; ++i)
      mag_slot_[i] = angles_ + i;
    size_ = angles_ + n;
    for (int i = 0; i < n; ++i)
      if (angle_slot_[i] >= 0)
        owner_.push_back(i);
    for (int i = 0; i < n; ++i)
      owner_.push_back(i);
  }

  const NetworkModel& network() const { return *net_; }
  int size() const { return size_; }
  int angle_count() const { return angles_; }
  int angle_index(int node) const { return angle_slot_[node]; }
  int mag_index(int node) const { return mag_slot_[node]; }
  /// Node a state component belongs to.
  int node_of(int component) const { return owner_[component]; }
  Phase phase_of(int component) const { return net_->node(owner_[component]).phase; }
  bool is_angle(int component) const { return component < angles_; }

  Eigen::VectorXd from_voltages(std::span<const cplx> v) const {
    if (static_cast<int>(v.size()) != net_->node_count())
      throw DomainError("state: voltage vector size mismatch");
    Eigen::VectorXd x(size_);
    for (int i = 0; i < net_->node_count(); ++i) {
      if (angle_slot_[i] >= 0)
        x[angle_slot_[i]] = std::arg(v[i]);
      x[mag_slot_[i]] = std::abs(v[i]);
    }
    return x;
  }

  std::vector<cplx> to_voltages(const Eigen::VectorXd& x) const {
    if (x.size() != size_)
      throw DomainError("state: vector has " + std::to_string(x.size()) + " entries, expected " +
                        std::to_string(size_));
    std::vector<cplx> v(net_->node_count());
    for (int i = 0; i < net_->node_count(); ++i) {
      const double ang = angle_slot_[i] >= 0 ? x[angle_slot_[i]] : std::arg(net_->slack_voltage(net_->node(i).phase));
      v[i] = std::polar(x[mag_slot_[i]], ang);
    }
    return v;
  }

  /// Flat profile: slack magnitude everywhere, nominal phase displacement.
  Eigen::VectorXd flat_start() const {
    std::vector<cplx> v(net_->node_count());
    for (int i = 0; i < net_->node_count(); ++i)
      v[i] = net_->slack_voltage(net_->node(i).phase);
    return from_voltages(v);
  }

private:
  const NetworkModel* net_;
  int angles_ = 0;
  int size_ = 0;
  std::vector<int> angle_slot_;
  std::vector<int> mag_slot_;
  std::vector<int> owner_;
};

} // namespace fase::est
