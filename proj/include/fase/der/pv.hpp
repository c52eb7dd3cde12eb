#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fase/common/error.hpp"

namespace fase::der {

/// Single-diode module. Defaults describe a 200 W, 54-cell polycrystalline module.
struct PvModuleParams {
  double i_o = 9.825e-8;   ///< diode saturation current, A
  double n = 1.3;          ///< ideality factor
  double r_s = 0.221;      ///< ohm
  double r_sh = 415.405;   ///< ohm
  int cells = 54;          ///< series cells
  double i_sc = 8.21;      ///< short-circuit current at T1, G_nom; A
  double i_sc_t2 = 8.21 + 3.18e-3 * 25.0; ///< short-circuit current at T2
  double t1_k = 298.15;
  double t2_k = 323.15;
  double g_nom = 1000.0;   ///< W/m2
  double v_oc = 32.9;      ///< open-circuit voltage at reference, V (search bound)
  double rated_w = 200.0;
  double noct_c = 47.0;    ///< nominal operating cell temperature; <= 0 uses ambient directly

  static constexpr double q = 1.602176634e-19;
  static constexpr double k = 1.380649e-23;

  void validate() const {
    if (!(i_o > 0.0) || !(r_s >= 0.0) || !(r_sh > 0.0) || !(g_nom > 0.0) || !(n > 0.0) || cells < 1 ||
        !(t2_k != t1_k) || !(rated_w > 0.0) || !(v_oc > 0.0))
      throw DomainError("pv: invalid module parameters");
  }

  /// Temperature coefficient of the photocurrent from two datasheet points, A/K.
  double k_o() const { return (i_sc_t2 - i_sc) / (t2_k - t1_k); }
};

/// Photocurrent at irradiance g and cell temperature t_k.
inline double pv_photocurrent(const PvModuleParams& p, double g, double t_k) {
  return (p.i_sc + p.k_o() * (t_k - p.t1_k)) * (g / p.g_nom);
}

/// Module current at terminal voltage v: solves
/// I = I_ph - I_o (exp((v + I R_s)/(n N_s kT/q)) - 1) - (v + I R_s)/R_sh.
inline double pv_current(const PvModuleParams& p, double v, double g, double t_k) {
  const double iph = pv_photocurrent(p, g, t_k);
  const double a = p.n * p.cells * PvModuleParams::k * t_k / PvModuleParams::q;
  auto f = [&](double i) {
    const double vd = v + i * p.r_s;
    return iph - p.i_o * std::expm1(vd / a) - vd / p.r_sh - i;
  };
  auto df = [&](double i) {
    const double vd = v + i * p.r_s;
    return -p.i_o * std::exp(vd / a) * p.r_s / a - p.r_s / p.r_sh - 1.0;
  };
  // f is strictly decreasing in I; bracket the root, then damped Newton with bisection fallback.
  double lo = -iph - 1.0 - std::abs(v) / p.r_sh, hi = iph + 1.0;
  while (f(lo) < 0.0)
    lo = 2.0 * lo - 1.0;
  while (f(hi) > 0.0)
    hi = 2.0 * hi + 1.0;
  double i = std::clamp(iph, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double fi = f(i);
    if (std::abs(fi) < 1e-12)
      return i;
    (fi > 0.0 ? lo : hi) = i;
    double next = i - fi / df(i);
    if (!(next > lo && next < hi))
      next = 0.5 * (lo + hi);
    if (std::abs(next - i) < 1e-14 * std::max(1.0, std::abs(i)))
      return next;
    i = next;
  }
  throw ConvergenceError("pv_current: implicit diode equation did not converge");
}

struct PvOperatingPoint {
  double v = 0.0;
  double i = 0.0;
  double p_w = 0.0;
};

/// Maximum-power point by golden-section search on V I(V) over [0, 1.2 V_oc].
inline PvOperatingPoint pv_mpp(const PvModuleParams& p, double g, double t_k) {
  if (!(g > 0.0))
    return {};
  auto power = [&](double v) { return v * pv_current(p, v, g, t_k); };
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = 0.0, b = 1.2 * p.v_oc;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = power(c), fd = power(d);
  while (b - a > 1e-7) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = power(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = power(d);
    }
  }
  const double v = 0.5 * (a + b);
  const double i = pv_current(p, v, g, t_k);
  return {v, i, std::max(0.0, v * i)};
}

inline double pv_cell_temperature_k(const PvModuleParams& p, double ambient_c, double g) {
  const double t = p.noct_c > 0.0 ? ambient_c + (p.noct_c - 20.0) / 800.0 * g : ambient_c;
  return t + 273.15;
}

struct PvSeries {
  std::vector<double> power_w;    ///< clipped to [0, rated]
  std::vector<double> normalized; ///< power / rated
};

inline PvSeries simulate_pv(const PvModuleParams& p, std::span<const double> irradiance_wm2,
                            std::span<const double> ambient_c) {
  p.validate();
  if (irradiance_wm2.size() != ambient_c.size())
    throw DomainError("simulate_pv: irradiance and temperature series differ in length");
  PvSeries out;
  out.power_w.reserve(irradiance_wm2.size());
  out.normalized.reserve(irradiance_wm2.size());
  for (std::size_t t = 0; t < irradiance_wm2.size(); ++t) {
    const double g = irradiance_wm2[t];
    if (!(g >= 0.0))
      throw DomainError("simulate_pv: negative irradiance at slot " + std::to_string(t));
    const double w = std::clamp(pv_mpp(p, g, pv_cell_temperature_k(p, ambient_c[t], g)).p_w, 0.0, p.rated_w);
    out.power_w.push_back(w);
    out.normalized.push_back(w / p.rated_w);
  }
  return out;
}

} // namespace fase::der
