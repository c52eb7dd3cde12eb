#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "fase/grid/network.hpp"

namespace fase::testing {

// Random radial feeder: every child carries a subset of its parent's phases,
// impedances are positive-definite in R with mild mutual coupling.
inline grid::NetworkModel random_radial_network(std::mt19937_64& gen, int max_buses = 10,
                                                double load_scale_kw = 60.0, bool coupled = true) {
  using grid::Phase;
  std::uniform_int_distribution<int> nbus(2, max_buses);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int n = nbus(gen);

  std::vector<grid::Bus> buses;
  std::vector<grid::Branch> branches;
  std::vector<grid::LoadSpec> loads;
  std::vector<grid::PhaseSet> phases(n);
  phases[0] = grid::PhaseSet::parse("ABC");
  buses.push_back({"b0", phases[0], 4.16});
  for (int i = 1; i < n; ++i) {
    const int parent = std::uniform_int_distribution<int>(0, i - 1)(gen);
    std::vector<Phase> avail = phases[parent].list();
    std::shuffle(avail.begin(), avail.end(), gen);
    const int keep = std::uniform_int_distribution<int>(1, static_cast<int>(avail.size()))(gen);
    grid::PhaseSet ps;
    for (int k = 0; k < keep; ++k)
      ps.insert(avail[k]);
    phases[i] = ps;
    buses.push_back({"b" + std::to_string(i), ps, 4.16});

    const auto list = ps.list();
    const int m = static_cast<int>(list.size());
    const double len = 0.05 + 0.3 * u01(gen); // miles
    Eigen::MatrixXcd z(m, m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) {
        if (a == b)
          z(a, b) = {(0.3 + 0.5 * u01(gen)) * len, (0.6 + 0.6 * u01(gen)) * len};
        else
          z(a, b) = coupled ? std::complex<double>{0.15 * len, 0.4 * len} : std::complex<double>{};
      }
    z = 0.5 * (z + z.transpose()).eval();
    grid::Branch br;
    // Random orientation exercises re-orientation in the model.
    if (u01(gen) < 0.3) {
      br.from = "b" + std::to_string(i);
      br.to = "b" + std::to_string(parent);
    } else {
      br.from = "b" + std::to_string(parent);
      br.to = "b" + std::to_string(i);
    }
    br.phases = list;
    br.z_ohm = z;
    branches.push_back(std::move(br));

    for (Phase p : list)
      if (u01(gen) < 0.8)
        loads.push_back({"b" + std::to_string(i), p, load_scale_kw * (0.2 + u01(gen)), 0.85 + 0.14 * u01(gen)});
  }
  return grid::NetworkModel(std::move(buses), std::move(branches), std::move(loads),
                            {"b0", 1.02, 0.0}, 1.0, "random");
}

// Slack 'src' feeding one load bus over a single-phase branch with impedance
// z_pu (4.16 kV, 1 MVA base).
inline grid::NetworkModel two_bus_network(std::complex<double> z_pu, double v_slack = 1.0) {
  const double zbase = 4.16 * 4.16 / 1.0;
  std::vector<grid::Bus> buses{{"src", grid::PhaseSet::parse("A"), 4.16},
                               {"load", grid::PhaseSet::parse("A"), 4.16}};
  grid::Branch br;
  br.from = "src";
  br.to = "load";
  br.phases = {grid::Phase::A};
  br.z_ohm = Eigen::MatrixXcd::Constant(1, 1, z_pu * zbase);
  return grid::NetworkModel(std::move(buses), {br}, {}, {"src", v_slack, 0.0}, 1.0, "two-bus");
}

} // namespace fase::testing
