#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fase/estimation/state.hpp"
#include "fase/measure/measurement.hpp"

namespace fase::est {

using measure::Kind;
using measure::MeasurementSpec;

inline double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  a = std::remainder(a, 2.0 * pi);
  return a <= -pi ? a + 2.0 * pi : a;
}

/// Unbalanced three-phase measurement functions h(x) and their analytic Jacobian.
///
/// Every branch or injection quantity is expressed through a current that is
/// linear in the node voltages, I = sum_k c_k V_k, so power readings are
/// S = V_i conj(I) and current readings are |I|. Injections count generation
/// as positive.
class MeasurementModel {
public:
  MeasurementModel(const StateLayout& layout, std::vector<MeasurementSpec> specs)
      : layout_(layout), specs_(std::move(specs)) {
    const auto& net = layout_.network();
    rows_.reserve(specs_.size());
    for (const auto& s : specs_) {
      measure::validate_spec(net, s);
      rows_.push_back(compile(net, s));
    }
  }

  const StateLayout& layout() const { return layout_; }
  const std::vector<MeasurementSpec>& specs() const { return specs_; }
  int rows() const { return static_cast<int>(specs_.size()); }
  int cols() const { return layout_.size(); }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const {
    const auto v = layout_.to_voltages(x);
    Eigen::VectorXd h(rows());
    for (int r = 0; r < rows(); ++r)
      h[r] = value(rows_[r], v);
    return h;
  }

  /// z - h(x), with angle rows wrapped to (-pi, pi].
  Eigen::VectorXd residual(const Eigen::VectorXd& z, const Eigen::VectorXd& x) const {
    Eigen::VectorXd e = z - evaluate(x);
    for (int r = 0; r < rows(); ++r)
      if (rows_[r].kind == Kind::voltage_ang)
        e[r] = wrap_angle(e[r]);
    return e;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
    const auto v = layout_.to_voltages(x);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(rows(), cols());
    for (int r = 0; r < rows(); ++r)
      fill_row(rows_[r], v, H.row(r));
    return H;
  }

private:
  struct Row {
    Kind kind;
    int node = -1;                           ///< node whose voltage enters directly
    std::vector<std::pair<int, cplx>> terms; ///< current coefficients
  };

  static void add_branch_terms(const grid::NetworkModel& net, int k, int near_bus, Phase p,
                               std::map<int, cplx>& acc) {
    const auto& br = net.branches()[k];
    const int far_bus = net.from_index(k) == near_bus ? net.to_index(k) : net.from_index(k);
    const int row = br.local(p);
    for (std::size_t m = 0; m < br.phases.size(); ++m) {
      const cplx y = br.y_pu(row, static_cast<Eigen::Index>(m));
      acc[net.node_index(near_bus, br.phases[m])] += y;
      acc[net.node_index(far_bus, br.phases[m])] -= y;
    }
  }

  static Row compile(const grid::NetworkModel& net, const MeasurementSpec& s) {
    const auto& loc = s.location;
    Row row{s.kind, net.node_index(loc.bus, loc.phase), {}};
    std::map<int, cplx> acc;
    switch (s.kind) {
    case Kind::voltage_mag:
    case Kind::voltage_ang:
      return row;
    case Kind::power_flow_p:
    case Kind::power_flow_q:
    case Kind::branch_current_mag: {
      const int k = net.find_branch(loc.bus, loc.to_bus)->first;
      add_branch_terms(net, k, net.bus_index(loc.bus), loc.phase, acc);
      break;
    }
    case Kind::pseudo_injection_p:
    case Kind::pseudo_injection_q: {
      const int bus = net.bus_index(loc.bus);
      std::vector<int> incident = net.child_branches(bus);
      if (net.parent_branch(bus) >= 0)
        incident.push_back(net.parent_branch(bus));
      for (int k : incident)
        if (net.branches()[k].local(loc.phase) >= 0)
          add_branch_terms(net, k, bus, loc.phase, acc);
      break;
    }
    }
    row.terms.assign(acc.begin(), acc.end());
    return row;
  }

  static cplx current(const Row& row, const std::vector<cplx>& v) {
    cplx i{};
    for (const auto& [node, c] : row.terms)
      i += c * v[node];
    return i;
  }

  static double value(const Row& row, const std::vector<cplx>& v) {
    switch (row.kind) {
    case Kind::voltage_mag: return std::abs(v[row.node]);
    case Kind::voltage_ang: return std::arg(v[row.node]);
    case Kind::branch_current_mag: return std::abs(current(row, v));
    case Kind::power_flow_p:
    case Kind::pseudo_injection_p: return (v[row.node] * std::conj(current(row, v))).real();
    case Kind::power_flow_q:
    case Kind::pseudo_injection_q: return (v[row.node] * std::conj(current(row, v))).imag();
    }
    return 0.0;
  }

  // Polar derivatives of a node voltage: dV/dtheta = jV, dV/dm = V/|V|.
  template <class RowRef>
  void add(RowRef h, int node, cplx d_theta, cplx d_mag, bool imag_part) const {
    const double a = imag_part ? d_theta.imag() : d_theta.real();
    const double m = imag_part ? d_mag.imag() : d_mag.real();
    if (const int ia = layout_.angle_index(node); ia >= 0)
      h[ia] += a;
    h[layout_.mag_index(node)] += m;
  }

  template <class RowRef>
  void fill_row(const Row& row, const std::vector<cplx>& v, RowRef h) const {
    const cplx j{0.0, 1.0};
    switch (row.kind) {
    case Kind::voltage_mag:
      h[layout_.mag_index(row.node)] = 1.0;
      return;
    case Kind::voltage_ang:
      if (const int ia = layout_.angle_index(row.node); ia >= 0)
        h[ia] = 1.0;
      return;
    case Kind::branch_current_mag: {
      const cplx i = current(row, v);
      const double mag = std::abs(i);
      if (mag < 1e-12)
        return; // |I| is not differentiable at zero; leave the row empty
      for (const auto& [node, c] : row.terms) {
        const cplx u = std::polar(1.0, std::arg(v[node]));
        // d|I| = Re(conj(I) dI) / |I|
        add(h, node, std::conj(i) * c * j * v[node] / mag, std::conj(i) * c * u / mag, false);
      }
      return;
    }
    case Kind::power_flow_p:
    case Kind::power_flow_q:
    case Kind::pseudo_injection_p:
    case Kind::pseudo_injection_q: {
      const bool q = row.kind == Kind::power_flow_q || row.kind == Kind::pseudo_injection_q;
      const cplx i = current(row, v);
      const cplx vi = v[row.node];
      // dS = dV_i conj(I) + V_i conj(dI)
      add(h, row.node, j * vi * std::conj(i), std::polar(1.0, std::arg(vi)) * std::conj(i), q);
      for (const auto& [node, c] : row.terms) {
        const cplx u = std::polar(1.0, std::arg(v[node]));
        add(h, node, vi * std::conj(c * j * v[node]), vi * std::conj(c * u), q);
      }
      return;
    }
    }
  }

  StateLayout layout_;
  std::vector<MeasurementSpec> specs_;
  std::vector<Row> rows_;
};

/// h(x) = Hx, for tests and linear sub-problems.
struct LinearModel {
  Eigen::MatrixXd H;

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const { return H * x; }
  Eigen::VectorXd residual(const Eigen::VectorXd& z, const Eigen::VectorXd& x) const { return z - H * x; }
  Eigen::MatrixXd jacobian(const Eigen::VectorXd&) const { return H; }
  int rows() const { return static_cast<int>(H.rows()); }
  int cols() const { return static_cast<int>(H.cols()); }
};

} // namespace fase::est
