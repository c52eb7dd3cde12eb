#pragma once

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fase/common/error.hpp"
#include "fase/common/timeslot.hpp"
#include "fase/der/simplex.hpp"

namespace fase::der {

/// Price-driven battery schedule over one horizon (typically a day).
struct BessSpec {
  double e_max_kwh = 0.0;
  double b_max_kw = 0.0;
  std::vector<double> price;  ///< per kWh
  std::vector<double> pv_kw;  ///< S_t
  std::vector<double> load_kw; ///< l
  double slot_hours = kSlotHours;

  void validate() const {
    if (!(e_max_kwh >= 0.0) || !(b_max_kw >= 0.0))
      throw DomainError("bess: e_max and b_max must be non-negative");
    if (price.empty() || pv_kw.size() != price.size() || load_kw.size() != price.size())
      throw DomainError("bess: price, pv and load series must be non-empty and of equal length");
    if (!(slot_hours > 0.0))
      throw DomainError("bess: slot length must be positive");
  }
};

struct BessDispatch {
  std::vector<double> b_kw;  ///< battery power, + charging
  std::vector<double> g_kw;  ///< grid import, - export
  std::vector<double> e_kwh; ///< stored energy at the start of each slot; the horizon is periodic
  double objective = 0.0;    ///< sum of price * grid energy
};

struct BessSchedule {
  std::vector<double> b_kw;
  std::vector<double> e_kwh;
};

/// Battery schedule only (independent of load and PV, because grid exchange is
/// unconstrained and priced symmetrically).
///
/// Stage one minimises sum_t c_t (e_{t+1} - e_t) with e_T = e_0, 0 <= e <= e_max
/// and |e_{t+1} - e_t| <= b_max dt. Stage two keeps that cost and minimises
/// sum_t |b_t|, so ties resolve toward an idle battery.
inline BessSchedule bess_schedule(const std::vector<double>& price, double e_max_kwh, double b_max_kw,
                                  double slot_hours) {
  const auto T = static_cast<Eigen::Index>(price.size());
  const double step = b_max_kw * slot_hours;
  if (T <= 1 || e_max_kwh <= 0.0 || step <= 0.0)
    return {std::vector<double>(static_cast<std::size_t>(T), 0.0), std::vector<double>(static_cast<std::size_t>(T), 0.0)};

  // Variables: e_0..e_{T-1}, then u_0..u_{T-1} (stage two only).
  auto next = [T](Eigen::Index t) { return (t + 1) % T; };
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    cost[next(t)] += price[static_cast<std::size_t>(t)];
    cost[t] -= price[static_cast<std::size_t>(t)];
  }

  Eigen::MatrixXd a1 = Eigen::MatrixXd::Zero(3 * T, T);
  Eigen::VectorXd b1(3 * T);
  for (Eigen::Index t = 0; t < T; ++t) {
    a1(t, t) = 1.0;
    b1[t] = e_max_kwh;
    a1(T + t, next(t)) = 1.0;
    a1(T + t, t) -= 1.0;
    b1[T + t] = step;
    a1(2 * T + t, next(t)) = -1.0;
    a1(2 * T + t, t) += 1.0;
    b1[2 * T + t] = step;
  }
  DenseSimplex lp;
  const auto first = lp.solve(cost, a1, b1);
  if (first.status != LpStatus::optimal)
    throw DomainError("bess: schedule LP is not solvable");

  const Eigen::Index n2 = 2 * T;
  Eigen::VectorXd c2 = Eigen::VectorXd::Zero(n2);
  c2.tail(T).setOnes();
  Eigen::MatrixXd a2 = Eigen::MatrixXd::Zero(4 * T + 1, n2);
  Eigen::VectorXd b2(4 * T + 1);
  for (Eigen::Index t = 0; t < T; ++t) {
    a2(t, t) = 1.0;
    b2[t] = e_max_kwh;
    a2(T + t, next(t)) = 1.0;
    a2(T + t, t) -= 1.0;
    a2(T + t, T + t) = -1.0;
    b2[T + t] = 0.0;
    a2(2 * T + t, next(t)) = -1.0;
    a2(2 * T + t, t) += 1.0;
    a2(2 * T + t, T + t) = -1.0;
    b2[2 * T + t] = 0.0;
    a2(3 * T + t, T + t) = 1.0;
    b2[3 * T + t] = step;
  }
  a2.block(4 * T, 0, 1, T) = cost.transpose();
  b2[4 * T] = first.objective + 1e-12 * (1.0 + std::abs(first.objective));
  const auto second = lp.solve(c2, a2, b2);
  const Eigen::VectorXd e = second.status == LpStatus::optimal ? Eigen::VectorXd(second.x.head(T)) : first.x;

  BessSchedule out{std::vector<double>(static_cast<std::size_t>(T)), std::vector<double>(static_cast<std::size_t>(T))};
  for (Eigen::Index t = 0; t < T; ++t) {
    double de = e[next(t)] - e[t];
    if (std::abs(de) < 1e-12)
      de = 0.0;
    out.b_kw[static_cast<std::size_t>(t)] = de / slot_hours;
    out.e_kwh[static_cast<std::size_t>(t)] = std::abs(e[t]) < 1e-12 ? 0.0 : e[t];
  }
  return out;
}

/// Completes a schedule with grid exchange g = b + l - S.
inline BessDispatch bess_dispatch(const BessSpec& spec, const BessSchedule& s) {
  BessDispatch d;
  d.b_kw = s.b_kw;
  d.e_kwh = s.e_kwh;
  const std::size_t T = spec.price.size();
  d.g_kw.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    d.g_kw[t] = s.b_kw[t] + spec.load_kw[t] - spec.pv_kw[t];
    d.objective += spec.price[t] * d.g_kw[t] * spec.slot_hours;
  }
  return d;
}

/// Minimum-cost dispatch for one horizon.
inline BessDispatch optimize_bess(const BessSpec& spec) {
  spec.validate();
  return bess_dispatch(spec, bess_schedule(spec.price, spec.e_max_kwh, spec.b_max_kw, spec.slot_hours));
}

/// Day-by-day dispatch over a long series. Days with identical prices share one LP solve.
inline std::vector<double> bess_year(std::span<const double> price, double e_max_kwh, double b_max_kw,
                                     double slot_hours = kSlotHours) {
  std::vector<double> b(price.size(), 0.0);
  std::map<std::vector<double>, BessSchedule> cache;
  for (std::size_t start = 0; start < price.size(); start += kSlotsPerDay) {
    const std::size_t end = std::min(price.size(), start + kSlotsPerDay);
    std::vector<double> day(price.begin() + static_cast<std::ptrdiff_t>(start),
                            price.begin() + static_cast<std::ptrdiff_t>(end));
    auto it = cache.find(day);
    if (it == cache.end())
      it = cache.emplace(day, bess_schedule(day, e_max_kwh, b_max_kw, slot_hours)).first;
    std::copy(it->second.b_kw.begin(), it->second.b_kw.end(), b.begin() + static_cast<std::ptrdiff_t>(start));
  }
  return b;
}

} // namespace fase::der
