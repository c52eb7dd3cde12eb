#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "fase/grid/network_io.hpp"
#include "fase/measure/assemble.hpp"
#include "fase/measure/sampling.hpp"
#include "fase/measure/stream_io.hpp"
#include "fase/measure/truth.hpp"
#include "../support/random_network.hpp"

using namespace fase;
using namespace fase::measure;
using grid::cplx;
using grid::Phase;

namespace {

std::string data_path(const std::string& name) { return std::string(FASE_DATA_DIR) + "/" + name; }

std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "fase_measure_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

// Receiving-end voltage of a single line from the quadratic in |V|^2.
cplx two_bus_voltage(cplx vs, cplx z, cplx s) {
  const double a = std::norm(vs) - 2.0 * (z * std::conj(s)).real();
  const double v2 = 0.5 * (a + std::sqrt(a * a - 4.0 * std::norm(z) * std::norm(s)));
  return std::conj(v2 + z * std::conj(s)) / std::conj(vs);
}

std::vector<Channel> feeder13_profile(const grid::NetworkModel& net, std::vector<Phase> current) {
  return real_time_profile(net, "650", {{"650", "632"}, {"632", "671"}}, {"632", "671"}, current);
}

} // namespace

TEST(Truth, ZeroDemandGivesFlatVoltages) {
  const auto net = grid::load_network(data_path("feeder13.json"));
  const std::vector<cplx> zero(static_cast<std::size_t>(net.node_count()));
  const auto truth = generate_truth(net, demand_from_series({zero}), 0, 1);
  ASSERT_EQ(truth.size(), 1);
  for (int n = 0; n < net.node_count(); ++n)
    EXPECT_LT(std::abs(truth.at(0).voltage[n] - net.slack_voltage(net.node(n).phase)), 1e-12);
}

TEST(Truth, TwoBusDaySeriesMatchesClosedForm) {
  const cplx z{0.01, 0.02};
  const auto net = fase::testing::two_bus_network(z);
  std::vector<std::vector<cplx>> series;
  for (int k = 0; k < 48; ++k)
    series.push_back({cplx{}, cplx{0.5 + 0.4 * std::sin(k / 7.0), 0.2 + 0.1 * std::cos(k / 5.0)}});
  const auto truth = generate_truth(net, demand_from_series(series, 100), 100, 48);
  ASSERT_EQ(truth.size(), 48);
  for (int k = 0; k < 48; ++k)
    EXPECT_LT(std::abs(truth.at(100 + k).voltage[1] - two_bus_voltage(1.0, z, series[k][1])), 1e-8) << k;
  EXPECT_THROW(truth.at(99), DomainError);
}

TEST(Truth, MissingSlotIsNamed) {
  const auto net = fase::testing::two_bus_network({0.01, 0.01});
  std::vector<std::vector<cplx>> series(3, std::vector<cplx>{cplx{}, cplx{0.1, 0.0}});
  try {
    generate_truth(net, demand_from_series(series), 0, 4);
    FAIL() << "expected schema error";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("slot 3"), std::string::npos) << e.what();
  }
  series[1].pop_back();
  EXPECT_THROW(generate_truth(net, demand_from_series(series), 0, 3), SchemaError);
}

TEST(Truth, CollapseNamesSlot) {
  const auto net = fase::testing::two_bus_network({0.1, 0.1});
  std::vector<std::vector<cplx>> series{{cplx{}, cplx{0.1, 0}}, {cplx{}, cplx{50.0, 0}}};
  try {
    generate_truth(net, demand_from_series(series), 0, 2);
    FAIL() << "expected convergence error";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("slot 1: ", 0), 0u) << e.what();
  }
}

TEST(TrueValue, MatchesPowerFlowQuantities) {
  const auto net = grid::load_network(data_path("feeder13.json"));
  const auto demand = net.snapshot_demand_pu();
  const auto sol = grid::bfs_power_flow(net, demand);
  // Injections are the negated demand; the slack bus supplies the feeder.
  for (int n = 0; n < net.node_count(); ++n) {
    const auto& nr = net.node(n);
    if (nr.bus == net.slack_index())
      continue;
    const Location l{net.buses()[nr.bus].id, {}, nr.phase};
    EXPECT_NEAR(true_value(net, sol, {Kind::pseudo_injection_p, l}), -demand[n].real(), 1e-7);
    EXPECT_NEAR(true_value(net, sol, {Kind::pseudo_injection_q, l}), -demand[n].imag(), 1e-7);
  }
  const auto src = grid::slack_injection(net, sol, demand);
  for (Phase p : {Phase::A, Phase::B, Phase::C}) {
    EXPECT_NEAR(true_value(net, sol, {Kind::power_flow_p, {"650", "632", p}}), src[static_cast<int>(p)].real(), 1e-12);
    // Metering the same line from the far end sees the opposite current.
    const double i_near = true_value(net, sol, {Kind::branch_current_mag, {"632", "671", p}});
    EXPECT_NEAR(true_value(net, sol, {Kind::branch_current_mag, {"671", "632", p}}), i_near, 1e-15);
  }
}

TEST(Sample, NoiseFreeLimitAndDeterminism) {
  const auto net = grid::load_network(data_path("feeder13.json"));
  const auto sol = grid::bfs_power_flow(net, net.snapshot_demand_pu());
  const auto channels = feeder13_profile(net, {Phase::A, Phase::B, Phase::C});
  std::vector<MeasurementSpec> tiny;
  for (const auto& c : channels)
    tiny.push_back({c.kind, c.location, 1e-12});
  const auto set = sample_measurements(net, sol, tiny, 5, 9);
  ASSERT_EQ(set.entries.size(), channels.size());
  for (std::size_t i = 0; i < channels.size(); ++i)
    EXPECT_NEAR(set.entries[i].value, true_value(net, sol, channels[i]), 1e-9);

  const auto specs = realize_specs(net, sol, channels, NoiseProfile{});
  const auto a = sample_measurements(net, sol, specs, 5, 9);
  const auto b = sample_measurements(net, sol, specs, 5, 9);
  const auto c = sample_measurements(net, sol, specs, 5, 10);
  bool differs = false;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    EXPECT_EQ(a.entries[i].value, b.entries[i].value);
    differs |= a.entries[i].value != c.entries[i].value;
  }
  EXPECT_TRUE(differs);
}

TEST(Sample, NoiseStatistics) {
  const auto net = grid::load_network(data_path("feeder13.json"));
  const auto sol = grid::bfs_power_flow(net, net.snapshot_demand_pu());
  const MeasurementSpec spec{Kind::voltage_mag, {"671", {}, Phase::B}, 0.005};
  const double truth = true_value(net, sol, {spec.kind, spec.location});
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int k = 0; k < n; ++k) {
    const double e = sample_measurements(net, sol, {spec}, 77, k).entries[0].value - truth;
    sum += e;
    sq += e * e;
  }
  const double mean = sum / n;
  const double sd = std::sqrt((sq - n * mean * mean) / (n - 1));
  EXPECT_LT(std::abs(mean), 3.0 * spec.sigma / std::sqrt(n));
  EXPECT_NEAR(sd, spec.sigma, 0.02 * spec.sigma);
}

TEST(NoiseProfile, RelativeChannelsUseFloor) {
  const NoiseProfile p;
  EXPECT_EQ(p.sigma(Kind::voltage_mag, 1.04), 0.005);
  EXPECT_EQ(p.sigma(Kind::voltage_ang, -2.0), 0.005);
  EXPECT_DOUBLE_EQ(p.sigma(Kind::power_flow_p, -0.5), 0.005);
  EXPECT_EQ(p.sigma(Kind::power_flow_q, 0.01), 1e-3);
  EXPECT_DOUBLE_EQ(p.sigma(Kind::branch_current_mag, 0.4), 0.004);
  EXPECT_DOUBLE_EQ(p.sigma(Kind::pseudo_injection_p, -0.2), 0.02);
  NoiseProfile bad;
  bad.v_ang = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Availability, Extremes) {
  std::vector<std::string> ids;
  for (int i = 0; i < 50; ++i)
    ids.push_back("m" + std::to_string(i));
  EXPECT_EQ(sample_smart_meters(ids, {1.0, 3}, 7), ids);
  EXPECT_TRUE(sample_smart_meters(ids, {0.0, 3}, 7).empty());
  EXPECT_THROW(sample_smart_meters(ids, {1.5, 3}, 7), ConfigError);
  EXPECT_EQ(sample_smart_meters(ids, {0.4, 3}, 7), sample_smart_meters(ids, {0.4, 3}, 7));
}

TEST(Availability, BinomialConcentration) {
  std::vector<std::string> ids;
  for (int i = 0; i < 1000; ++i)
    ids.push_back("meter-" + std::to_string(i));
  const auto mask = availability_mask(ids, {0.4, 11}, 0, 100);
  double on = 0.0;
  for (const auto& row : mask.available)
    on += std::accumulate(row.begin(), row.end(), 0.0);
  const double rate = on / (1000.0 * 100.0);
  EXPECT_GE(rate, 0.38);
  EXPECT_LE(rate, 0.42);
}

TEST(Availability, IndependentAcrossMetersAndSlots) {
  std::vector<std::string> ids;
  for (int i = 0; i < 400; ++i)
    ids.push_back("h" + std::to_string(i));
  const auto mask = availability_mask(ids, {0.4, 2024}, 0, 200);
  // 2x2 contingency of neighbouring draws; chi-square with one degree of freedom.
  auto chi2 = [](double n00, double n01, double n10, double n11) {
    const double n = n00 + n01 + n10 + n11;
    const double r0 = n00 + n01, r1 = n10 + n11, c0 = n00 + n10, c1 = n01 + n11;
    auto term = [n](double o, double r, double c) {
      const double e = r * c / n;
      return (o - e) * (o - e) / e;
    };
    return term(n00, r0, c0) + term(n01, r0, c1) + term(n10, r1, c0) + term(n11, r1, c1);
  };
  const double critical = 6.635; // 0.99 quantile of chi-square(1)
  double t[2][2] = {{0, 0}, {0, 0}}, m[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t k = 0; k < mask.slots.size(); ++k)
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if (k + 1 < mask.slots.size())
        t[static_cast<int>(mask.available[k][j])][static_cast<int>(mask.available[k + 1][j])] += 1;
      if (j + 1 < ids.size())
        m[static_cast<int>(mask.available[k][j])][static_cast<int>(mask.available[k][j + 1])] += 1;
    }
  EXPECT_LT(chi2(t[0][0], t[0][1], t[1][0], t[1][1]), critical);
  EXPECT_LT(chi2(m[0][0], m[0][1], m[1][0], m[1][1]), critical);
}

TEST(Availability, MaskCsvRoundTrip) {
  const std::vector<std::string> ids{"632.1/m0", "632.1/m1", "671.3/m0"};
  const auto mask = availability_mask(ids, {0.5, 4}, 20, 6);
  const auto path = temp_path("mask.csv");
  write_availability_mask(path, mask);
  const auto back = read_availability_mask(path);
  EXPECT_EQ(back.meters, mask.meters);
  EXPECT_EQ(back.slots, mask.slots);
  EXPECT_EQ(back.available, mask.available);
}

TEST(Profile, DefaultFeederProfile) {
  const auto net = grid::load_network(data_path("feeder13.json"));
  const auto shipped = read_channel_profile(data_path("feeder13_channels.csv"));
  EXPECT_EQ(shipped, feeder13_profile(net, {Phase::A, Phase::B, Phase::C}));
  int current = 0;
  for (const auto& c : shipped)
    current += c.kind == Kind::branch_current_mag;
  EXPECT_EQ(shipped.size() - current, 18u);
  EXPECT_THROW(real_time_profile(net, "650", {{"650", "611"}}, {}, {}), ConfigError);
  EXPECT_THROW(real_time_profile(net, "650", {}, {"684", "611"}, {Phase::A}), ConfigError);
}

TEST(Assemble, EighteenChannelsAndOneCurrentSensor) {
  const auto net = grid::load_network(data_path("feeder13.json"));
  const auto sol = grid::bfs_power_flow(net, net.snapshot_demand_pu());
  const auto specs = realize_specs(net, sol, feeder13_profile(net, {Phase::A}), NoiseProfile{});
  const auto rt = sample_measurements(net, sol, specs, 1, 0);
  const auto a = assemble_measurement_vector(rt.entries, {}, {});
  EXPECT_EQ(a.size(), 19);
  for (int i = 1; i < a.size(); ++i)
    EXPECT_LE(a.specs[i - 1].kind, a.specs[i].kind);
  const auto b = assemble_measurement_vector(rt.entries, {}, {});
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.r, b.r);

  auto dup = rt.entries;
  dup.push_back(dup.front());
  EXPECT_THROW(assemble_measurement_vector(dup, {}, {}), DomainError);
}

TEST(Assemble, VirtualZeroInjections) {
  const auto net = grid::load_network(data_path("feeder13.json"));
  const auto v = virtual_zero_specs(net, net.loaded_nodes(), 1e-6);
  for (const auto& s : v) {
    EXPECT_NE(s.location.bus, "650");
    EXPECT_EQ(s.sigma, 1e-6);
  }
  // 632, 633, 680 and 684 carry no load on any phase.
  int at_632 = 0;
  for (const auto& s : v)
    at_632 += s.location.bus == "632";
  EXPECT_EQ(at_632, 6);
  const auto a = assemble_measurement_vector({}, {}, v);
  EXPECT_EQ(a.z, Eigen::VectorXd::Zero(a.size()));
  EXPECT_EQ(a.r, Eigen::VectorXd::Constant(a.size(), 1e-12));
}

TEST(StreamCsv, RoundTrip) {
  const auto net = grid::load_network(data_path("feeder13.json"));
  const auto sol = grid::bfs_power_flow(net, net.snapshot_demand_pu());
  const auto specs = realize_specs(net, sol, feeder13_profile(net, {Phase::A, Phase::B, Phase::C}), NoiseProfile{});
  std::vector<MeasurementSet> sets{sample_measurements(net, sol, specs, 3, 0),
                                   sample_measurements(net, sol, specs, 3, 1)};
  sets[1].entries.push_back({{Kind::pseudo_injection_p, {"671", {}, Phase::A}, 0.02}, -0.07, 0.0004, Origin::pseudo});
  const auto path = temp_path("stream.csv");
  write_measurement_stream(path, sets);
  const auto back = read_measurement_stream(path);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(back[k].slot, sets[k].slot);
    ASSERT_EQ(back[k].entries.size(), sets[k].entries.size());
    for (std::size_t i = 0; i < sets[k].entries.size(); ++i) {
      EXPECT_EQ(back[k].entries[i].value, sets[k].entries[i].value);
      EXPECT_EQ(back[k].entries[i].spec.sigma, sets[k].entries[i].spec.sigma);
      EXPECT_TRUE(back[k].entries[i].spec.same_channel(sets[k].entries[i].spec));
      EXPECT_EQ(back[k].entries[i].origin, sets[k].entries[i].origin);
    }
  }
  {
    std::ofstream bad(path);
    bad << "timestamp,kind,bus,phase,value,sigma\n2023-01-01T00:00,voltage_mag,650,A,1.0,0\n";
  }
  EXPECT_THROW(read_measurement_stream(path), SchemaError);
}
