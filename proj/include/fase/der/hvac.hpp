#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fase/common/error.hpp"
#include "fase/common/timeslot.hpp"

namespace fase::der {

/// Two-node thermal model of a dwelling: indoor air T_i and building mass T_m.
struct HvacParams {
  double ca = 2.0e6;     ///< air heat capacity, J/degC
  double cm = 1.5e7;     ///< mass heat capacity, J/degC
  double q_w = 6000.0;   ///< rated heat rate, W (+ heating, - cooling)
  bool reversible = true; ///< unit can also deliver -q_w (heat pump)
  double r1 = 1.0 / 250.0;  ///< 1/UA, degC/W
  double r2 = 1.0 / 1500.0; ///< 1/UA_mass, degC/W
  double band_low = 19.0;
  double band_high = 21.0;
  double cop = 3.0;
  double substep_s = 60.0; ///< thermostat sampling period

  void validate() const {
    if (!(ca > 0.0) || !(cm > 0.0) || !(r1 > 0.0) || !(r2 > 0.0))
      throw DomainError("hvac: capacities and resistances must be positive");
    if (!(band_low < band_high))
      throw DomainError("hvac: setpoint band must have low < high");
    if (!(cop > 0.0) || !(substep_s > 0.0))
      throw DomainError("hvac: cop and substep must be positive");
  }

  /// State matrix for x = [T_i, T_m].
  Eigen::Matrix2d a() const {
    Eigen::Matrix2d m;
    m << -(1.0 / (r2 * ca) + 1.0 / (r1 * ca)), 1.0 / (r2 * ca), 1.0 / (r2 * cm), -1.0 / (r2 * cm);
    return m;
  }
  /// Input matrix for w = [T_0, Q u].
  Eigen::Matrix2d b() const {
    Eigen::Matrix2d m;
    m << 1.0 / (r1 * ca), 1.0 / ca, 0.0, 0.0;
    return m;
  }
};

struct HvacState {
  double t_indoor = 20.0;
  double t_mass = 20.0;
};

/// Exact zero-order-hold discretisation of x' = A x + B w over `dt` seconds.
struct Discrete2 {
  Eigen::Matrix2d ad;
  Eigen::Matrix2d bd;
};

inline Discrete2 discretize(const Eigen::Matrix2d& A, const Eigen::Matrix2d& B, double dt) {
  // e^{At} = e^{st} (c(t) I + s1(t) (A - sI)), s = tr/2, q^2 = ((a11-a22)/2)^2 + a12 a21.
  const double s = 0.5 * A.trace();
  const double q2 = 0.25 * (A(0, 0) - A(1, 1)) * (A(0, 0) - A(1, 1)) + A(0, 1) * A(1, 0);
  const double eig_max = q2 >= 0.0 ? s + std::sqrt(q2) : s;
  if (!(eig_max < 0.0))
    throw DomainError("hvac: thermal model is not stable");
  double c = 0.0, s1 = 0.0;
  if (q2 > 0.0) {
    const double q = std::sqrt(q2);
    c = std::cosh(q * dt);
    s1 = std::sinh(q * dt) / q;
  } else if (q2 < 0.0) {
    const double q = std::sqrt(-q2);
    c = std::cos(q * dt);
    s1 = std::sin(q * dt) / q;
  } else {
    c = 1.0;
    s1 = dt;
  }
  Discrete2 d;
  d.ad = std::exp(s * dt) * (c * Eigen::Matrix2d::Identity() + s1 * (A - s * Eigen::Matrix2d::Identity()));
  d.bd = A.inverse() * (d.ad - Eigen::Matrix2d::Identity()) * B;
  return d;
}

struct HvacResult {
  std::vector<double> t_indoor; ///< at the end of each slot, degC
  std::vector<double> t_mass;
  std::vector<double> duty;      ///< share of the slot the unit ran, in [0, 1]
  std::vector<double> demand_kw; ///< electrical, |Q| duty / COP
  std::vector<int> mode;         ///< per thermostat step: +1 heating, -1 cooling, 0 off
};

/// Thermostat-controlled simulation over an ambient series (one value per slot).
///
/// A deadband controller switches the heat rate on below the band and off above
/// it (mirrored for cooling) at every sub-step. Output T = [1 0] x.
inline HvacResult simulate_hvac(const HvacParams& p, std::span<const double> ambient_c, HvacState x0 = {},
                                double slot_s = kSlotSeconds, bool record_modes = false) {
  p.validate();
  if (ambient_c.empty())
    throw DomainError("simulate_hvac: empty ambient series");
  if (!(slot_s > 0.0))
    throw DomainError("simulate_hvac: slot length must be positive");
  const int sub = std::max(1, static_cast<int>(std::lround(slot_s / p.substep_s)));
  const auto d = discretize(p.a(), p.b(), slot_s / sub);

  HvacResult out;
  const auto n = ambient_c.size();
  out.t_indoor.reserve(n);
  out.t_mass.reserve(n);
  out.duty.reserve(n);
  out.demand_kw.reserve(n);
  Eigen::Vector2d x(x0.t_indoor, x0.t_mass);
  int mode = 0;
  const double heat_sign = p.q_w >= 0.0 ? 1.0 : -1.0;
  for (double t0 : ambient_c) {
    double on = 0.0;
    for (int k = 0; k < sub; ++k) {
      const double ti = x[0];
      if (mode == 0) {
        if (ti < p.band_low && (heat_sign > 0.0 || p.reversible))
          mode = 1;
        else if (ti > p.band_high && (heat_sign < 0.0 || p.reversible))
          mode = -1;
      } else if (mode == 1 && ti >= p.band_high) {
        mode = 0;
      } else if (mode == -1 && ti <= p.band_low) {
        mode = 0;
      }
      const double q = mode == 0 ? 0.0 : mode * std::abs(p.q_w);
      x = d.ad * x + d.bd * Eigen::Vector2d(t0, q);
      on += mode != 0 ? 1.0 : 0.0;
      if (record_modes)
        out.mode.push_back(mode);
    }
    const double duty = on / sub;
    out.t_indoor.push_back(x[0]);
    out.t_mass.push_back(x[1]);
    out.duty.push_back(duty);
    out.demand_kw.push_back(duty * std::abs(p.q_w) / p.cop / 1000.0);
  }
  return out;
}

} // namespace fase::der
