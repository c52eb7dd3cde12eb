#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fase/estimation/ekf.hpp"
#include "fase/estimation/fase_runner.hpp"
#include "fase/estimation/holt.hpp"
#include "fase/estimation/measurement_model.hpp"
#include "fase/estimation/tuner.hpp"
#include "fase/grid/bfs.hpp"
#include "fase/grid/network_io.hpp"

#include "../support/channels.hpp"
#include "../support/random_network.hpp"

using namespace fase;
using namespace fase::est;
using measure::Kind;

namespace {

std::string data_path(const std::string& name) { return std::string(FASE_DATA_DIR) + "/" + name; }

HoltState scalar_holt(double x0, SmoothingParams s) { return HoltState::start(Eigen::VectorXd::Constant(1, x0), {grid::Phase::A}, s); }

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v)
    x[i++] = d;
  return x;
}

Eigen::VectorXd random_state(const StateLayout& layout, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> mag(0.9, 1.1), dang(-0.15, 0.15);
  std::vector<grid::cplx> v(layout.network().node_count());
  for (int i = 0; i < layout.network().node_count(); ++i) {
    const auto nominal = layout.network().slack_voltage(layout.network().node(i).phase);
    v[i] = std::polar(mag(gen), std::arg(nominal) + dang(gen));
  }
  return layout.from_voltages(v);
}

Eigen::MatrixXd central_differences(const MeasurementModel& m, const Eigen::VectorXd& x, double h) {
  Eigen::MatrixXd J(m.rows(), m.cols());
  for (int c = 0; c < m.cols(); ++c) {
    Eigen::VectorXd xp = x, xm = x;
    xp[c] += h;
    xm[c] -= h;
    J.col(c) = (m.evaluate(xp) - m.evaluate(xm)) / (2.0 * h);
  }
  return J;
}

} // namespace

// ---- Holt ----

TEST(Holt, HandComputedStep) {
  const auto pred = holt_update(vec({2.0}), scalar_holt(1.0, {0.5, 0.4}));
  EXPECT_NEAR(pred.state.level[0], 1.5, 1e-15);
  EXPECT_NEAR(pred.state.trend[0], 0.2, 1e-15);
  EXPECT_NEAR(pred.x_pred[0], 1.7, 1e-15);
}

TEST(Holt, UnitAlphaZeroBetaIsPersistence) {
  auto h = scalar_holt(0.3, {1.0, 0.0});
  for (double x : {1.0, -2.0, 5.5, 0.25}) {
    const auto pred = holt_update(vec({x}), h);
    EXPECT_DOUBLE_EQ(pred.x_pred[0], x);
    h = pred.state;
  }
}

TEST(Holt, ConstantSeriesIsFixedPoint) {
  auto h = scalar_holt(4.2, {0.7, 0.3});
  for (int k = 0; k < 100; ++k) {
    const auto pred = holt_update(vec({4.2}), h);
    EXPECT_DOUBLE_EQ(pred.x_pred[0], 4.2);
    h = pred.state;
  }
}

TEST(Holt, AffineFormReproducesPrediction) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  Eigen::VectorXd x0 = Eigen::VectorXd::NullaryExpr(6, [&] { return nd(gen); });
  auto h = HoltState::start(x0, {grid::Phase::A, grid::Phase::B, grid::Phase::C, grid::Phase::A, grid::Phase::B, grid::Phase::C},
                            {0.6, 0.25});
  h.params[1] = {0.9, 0.1};
  h.params[2] = {0.3, 0.2};
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(6, [&] { return nd(gen); });
    const auto pred = holt_update(x, h);
    EXPECT_LT((pred.F.cwiseProduct(x) + pred.g - pred.x_pred).lpNorm<Eigen::Infinity>(), 1e-13);
    for (int i = 0; i < 6; ++i) {
      const auto& s = h.params_of(i);
      EXPECT_DOUBLE_EQ(pred.F[i], s.alpha * (1.0 + s.beta));
    }
    h = pred.state;
  }
}

// Error-correction form: e = x - x~, a = x~ + alpha e, b = b_prev + alpha beta e.
TEST(Holt, MatchesErrorCorrectionForm) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0), ua(0.2, 0.95);
  for (int trial = 0; trial < 50; ++trial) {
    const double alpha = ua(gen);
    const double beta = std::uniform_real_distribution<double>(0.01, alpha - 0.01)(gen);
    const double x0 = u(gen);
    auto h = scalar_holt(x0, {alpha, beta});
    double fc = x0, b = 0.0;
    for (int k = 0; k < 200; ++k) {
      const double x = u(gen) + 0.01 * k;
      const double e = x - fc;
      const double a = fc + alpha * e;
      b += alpha * beta * e;
      fc = a + b;
      h = holt_update(vec({x}), h).state;
      EXPECT_NEAR(h.forecast[0], fc, 1e-12 * std::max(1.0, std::abs(fc)));
    }
  }
}

TEST(Holt, RejectsInvalidParameters) {
  EXPECT_THROW(holt_update(vec({1.0}), scalar_holt(0.0, {0.3, 0.5})), DomainError);
  EXPECT_THROW(scalar_holt(0.0, {0.0, 0.0}), DomainError);
  EXPECT_THROW(holt_update(vec({1.0, 2.0}), scalar_holt(0.0, {0.5, 0.2})), DomainError);
}

// ---- covariance time update ----

TEST(PredictCovariance, Examples) {
  const Eigen::MatrixXd P = (Eigen::MatrixXd(2, 2) << 2.0, 0.5, 0.5, 1.0).finished();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2, 2);
  EXPECT_TRUE(predict_covariance(P, I, Z).isApprox(P));
  EXPECT_TRUE(predict_covariance(I, 0.5 * I, Z).isApprox(0.25 * I));
  EXPECT_TRUE(predict_covariance(P, Z, I).isApprox(I));
  const Eigen::MatrixXd diag = predict_covariance(P, vec({0.5, 2.0}), 0.1);
  EXPECT_NEAR(diag(0, 0), 0.25 * 2.0 + 0.1, 1e-15);
  EXPECT_NEAR(diag(0, 1), 0.5 * 2.0 * 0.5, 1e-15);
  EXPECT_NEAR(diag(1, 1), 4.0 + 0.1, 1e-15);
  EXPECT_THROW(predict_covariance(P, Eigen::MatrixXd::Identity(3, 3), Z), DomainError);
}

// ---- measurement model ----

TEST(MeasurementModel, VoltageMagnitudeRowSelectsState) {
  const auto net = grid::load_network(data_path("feeder13.json"));
  const StateLayout layout(net);
  const MeasurementModel m(layout, {{Kind::voltage_mag, {"671", {}, grid::Phase::B}, 0.01}});
  std::mt19937_64 gen(1);
  const auto H = m.jacobian(random_state(layout, gen));
  Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(layout.size());
  e[layout.mag_index(net.node_index("671", grid::Phase::B))] = 1.0;
  EXPECT_EQ(H.row(0), e);
}

TEST(MeasurementModel, AgreesWithPowerFlow) {
  const auto net = grid::load_network(data_path("feeder13.json"));
  const StateLayout layout(net);
  const auto demand = net.snapshot_demand_pu();
  const auto sol = grid::bfs_power_flow(net, demand, {1e-12, 200});
  const Eigen::VectorXd x = layout.from_voltages(sol.voltage);
  std::vector<measure::MeasurementSpec> specs;
  for (int i = 0; i < net.node_count(); ++i)
    if (net.node(i).bus != net.slack_index()) {
      const auto& bus = net.buses()[net.node(i).bus].id;
      specs.push_back({Kind::pseudo_injection_p, {bus, {}, net.node(i).phase}, 1.0});
      specs.push_back({Kind::pseudo_injection_q, {bus, {}, net.node(i).phase}, 1.0});
    }
  const MeasurementModel m(layout, specs);
  const auto h = m.evaluate(x);
  for (int r = 0; r < m.rows(); ++r) {
    const auto& l = specs[r].location;
    const auto s = demand[net.node_index(l.bus, l.phase)];
    const double expect = specs[r].kind == Kind::pseudo_injection_p ? -s.real() : -s.imag();
    EXPECT_NEAR(h[r], expect, 1e-8) << l.bus;
  }

  const MeasurementModel flow(layout, {{Kind::power_flow_p, {"632", "671", grid::Phase::A}, 1.0},
                                       {Kind::branch_current_mag, {"671", "632", grid::Phase::C}, 1.0}});
  const auto hf = flow.evaluate(x);
  const auto ia = grid::branch_current(net, sol, "632", "671", grid::Phase::A).pu;
  const auto va = sol.voltage[net.node_index("632", grid::Phase::A)];
  EXPECT_NEAR(hf[0], (va * std::conj(ia)).real(), 1e-10);
  EXPECT_NEAR(hf[1], std::abs(grid::branch_current(net, sol, "632", "671", grid::Phase::C).pu), 1e-10);
}

TEST(MeasurementModel, JacobianMatchesFiniteDifferences) {
  const auto net = grid::load_network(data_path("feeder13.json"));
  const StateLayout layout(net);
  const MeasurementModel m(layout, fase::testing::all_channels(net));
  std::mt19937_64 gen(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_state(layout, gen);
    const Eigen::MatrixXd H = m.jacobian(x);
    const Eigen::MatrixXd F = central_differences(m, x, 1e-6);
    for (int r = 0; r < H.rows(); ++r)
      for (int c = 0; c < H.cols(); ++c)
        worst = std::max(worst, std::abs(H(r, c) - F(r, c)) / std::max(1.0, std::abs(F(r, c))));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(MeasurementModel, JacobianOnRandomNetworks) {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 15; ++trial) {
    const auto net = fase::testing::random_radial_network(gen, 8);
    const StateLayout layout(net);
    const MeasurementModel m(layout, fase::testing::all_channels(net));
    const auto x = random_state(layout, gen);
    const Eigen::MatrixXd H = m.jacobian(x);
    const Eigen::MatrixXd F = central_differences(m, x, 1e-6);
    const double scale = std::max(1.0, F.cwiseAbs().maxCoeff());
    EXPECT_LT((H - F).cwiseAbs().maxCoeff() / scale, 1e-6) << "trial " << trial;
  }
}

TEST(MeasurementModel, RejectsUnknownLocations) {
  const auto net = grid::load_network(data_path("feeder13.json"));
  const StateLayout layout(net);
  EXPECT_THROW(MeasurementModel(layout, {{Kind::power_flow_p, {"650", "671", grid::Phase::A}, 0.1}}), DomainError);
  EXPECT_THROW(MeasurementModel(layout, {{Kind::voltage_mag, {"611", {}, grid::Phase::A}, 0.1}}), DomainError);
  EXPECT_THROW(MeasurementModel(layout, {{Kind::voltage_mag, {"671", {}, grid::Phase::A}, 0.0}}), DomainError);
}

TEST(MeasurementModel, StateRoundTrip) {
  const auto net = grid::load_network(data_path("feeder13.json"));
  const StateLayout layout(net);
  EXPECT_EQ(layout.size(), 2 * net.node_count() - 3);
  std::mt19937_64 gen(5);
  const auto x = random_state(layout, gen);
  EXPECT_LT((layout.from_voltages(layout.to_voltages(x)) - x).lpNorm<Eigen::Infinity>(), 1e-14);
}

// ---- correction ----

TEST(EkfCorrect, ScalarHandExample) {
  const LinearModel lin{Eigen::MatrixXd::Ones(1, 1)};
  const auto c = ekf_correct(vec({0.0}), Eigen::MatrixXd::Ones(1, 1), vec({1.0}), vec({1.0}), lin);
  EXPECT_NEAR(c.K(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(c.x[0], 0.5, 1e-15);
  EXPECT_NEAR(c.P(0, 0), 0.5, 1e-15);
}

TEST(EkfCorrect, UninformativeMeasurementsKeepPrediction) {
  const LinearModel lin{(Eigen::MatrixXd(3, 2) << 1, 2, 0, 1, 3, -1).finished()};
  const Eigen::VectorXd xp = vec({0.3, -0.7});
  const auto c = ekf_correct(xp, Eigen::MatrixXd::Identity(2, 2), vec({5.0, 6.0, 7.0}), Eigen::VectorXd::Constant(3, 1e30), lin);
  EXPECT_LT((c.x - xp).norm(), 1e-12);
}

TEST(EkfCorrect, ExactMeasurementsInvertH) {
  const Eigen::MatrixXd H = (Eigen::MatrixXd(2, 2) << 2, 1, -1, 3).finished();
  const LinearModel lin{H};
  const Eigen::VectorXd z = vec({1.0, 4.0});
  const auto c = ekf_correct(vec({0.0, 0.0}), Eigen::MatrixXd::Identity(2, 2), z, Eigen::VectorXd::Constant(2, 1e-14), lin);
  EXPECT_LT((c.x - H.inverse() * z).norm(), 1e-9);
}

TEST(EkfCorrect, InformationFormIdentities) {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4, m = 6;
    const Eigen::MatrixXd H = Eigen::MatrixXd::NullaryExpr(m, n, [&] { return nd(gen); });
    const Eigen::MatrixXd B = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return nd(gen); });
    const Eigen::MatrixXd Pp = B * B.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd r = Eigen::VectorXd::NullaryExpr(m, [&] { return 0.1 + std::abs(nd(gen)); });
    const Eigen::VectorXd xp = Eigen::VectorXd::NullaryExpr(n, [&] { return nd(gen); });
    const Eigen::VectorXd z = Eigen::VectorXd::NullaryExpr(m, [&] { return nd(gen); });
    const auto c = ekf_correct(xp, Pp, z, r, LinearModel{H});

    const Eigen::MatrixXd Rinv = r.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd Pplus = (Pp.inverse() + H.transpose() * Rinv * H).inverse();
    const Eigen::MatrixXd K = Pplus * H.transpose() * Rinv;
    // Covariance-form gain as a second route.
    const Eigen::MatrixXd Kc = Pp * H.transpose() * (H * Pp * H.transpose() + Eigen::MatrixXd(r.asDiagonal())).inverse();
    EXPECT_LT((c.P - Pplus).norm(), 1e-10 * Pplus.norm());
    EXPECT_LT((c.K - K).norm(), 1e-10 * K.norm());
    EXPECT_LT((K - Kc).norm(), 1e-9 * K.norm());
    EXPECT_LT((c.x - (xp + K * (z - H * xp))).norm(), 1e-10 * (1.0 + c.x.norm()));
    EXPECT_LE(c.objective_post, c.objective_prior);
  }
}

TEST(EkfCorrect, ReportsUnobservableSubspace) {
  const Eigen::MatrixXd H = (Eigen::MatrixXd(2, 3) << 1, 0, 0, 0, 1, 0).finished();
  try {
    wls_estimate(Eigen::VectorXd::Zero(3), vec({1.0, 2.0}), vec({1.0, 1.0}), LinearModel{H});
    FAIL() << "expected unobservable error";
  } catch (const UnobservableError& e) {
    EXPECT_EQ(e.null_dimension, 1);
  }
}

TEST(EkfCorrect, RejectsBadInputs) {
  const LinearModel lin{Eigen::MatrixXd::Ones(1, 1)};
  const Eigen::MatrixXd P = Eigen::MatrixXd::Ones(1, 1);
  EXPECT_THROW(ekf_correct(vec({0.0}), P, vec({1.0}), vec({0.0}), lin), DomainError);
  EXPECT_THROW(ekf_correct(vec({0.0}), P, vec({1.0, 2.0}), vec({1.0}), lin), DomainError);
  EXPECT_THROW(ekf_correct(vec({0.0}), Eigen::MatrixXd::Zero(1, 1), vec({1.0}), vec({1.0}), lin), DomainError);
}

TEST(EkfCorrect, NonlinearObjectiveNeverIncreases) {
  const auto net = grid::load_network(data_path("feeder13.json"));
  const StateLayout layout(net);
  const auto specs = fase::testing::all_channels(net, 0.01);
  const MeasurementModel m(layout, specs);
  std::mt19937_64 gen(31);
  const auto truth = layout.from_voltages(grid::bfs_power_flow(net, net.snapshot_demand_pu()).voltage);
  const Eigen::VectorXd z = m.evaluate(truth);
  for (int trial = 0; trial < 10; ++trial) {
    const auto xp = random_state(layout, gen);
    for (bool iterated : {false, true}) {
      CorrectionOptions opt;
      opt.iterated = iterated;
      const auto c = ekf_correct(xp, 1e-2 * Eigen::MatrixXd::Identity(layout.size(), layout.size()), z,
                                 Eigen::VectorXd::Constant(m.rows(), 1e-4), m, opt);
      EXPECT_LE(c.objective_post, c.objective_prior);
      EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c.P).eigenvalues()[0], -1e-10);
    }
  }
}

// ---- tuner ----

TEST(Tuner, StepsAndDeadband) {
  const TunerParams t;
  auto up = adapt_smoothing({0.5, 0.10}, t, 0.0, 0.2);
  EXPECT_NEAR(up.beta, 0.113, 1e-12);
  EXPECT_NEAR(up.alpha, 0.51, 1e-12);
  auto down = adapt_smoothing({0.80, 0.3}, t, 0.5, 0.3);
  EXPECT_NEAR(down.alpha, 0.79, 1e-12);
  EXPECT_NEAR(down.beta, 0.287, 1e-12);
  for (auto [r0, r1] : {std::pair{0.3, 0.3}, {0.3, 0.35}, {0.35, 0.3}, {0.0, 0.09}, {0.09, 0.0}}) {
    const auto same = adapt_smoothing({0.6, 0.2}, t, r0, r1);
    EXPECT_EQ(same.alpha, 0.6);
    EXPECT_EQ(same.beta, 0.2);
  }
}

TEST(Tuner, KeepsOrderingAndBounds) {
  const TunerParams t;
  auto s = adapt_smoothing({0.99, 0.985}, t, 0.0, 1.0);
  EXPECT_GT(s.alpha, s.beta);
  EXPECT_LE(s.alpha, 0.99);
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> rate(0.0, 0.5);
  SmoothingParams p{0.7, 0.3};
  for (int k = 0; k < 2000; ++k) {
    p = adapt_smoothing(p, t, rate(gen), rate(gen));
    ASSERT_GT(p.alpha, p.beta);
    ASSERT_GT(p.beta, 0.0);
    ASSERT_LT(p.alpha, 1.0);
  }
  EXPECT_THROW(adapt_smoothing(p, t, -0.1, 0.0), DomainError);
}

// ---- full loop ----

namespace {

struct Feeder13Run {
  grid::NetworkModel net = grid::load_network(data_path("feeder13.json"));
  std::vector<Eigen::VectorXd> truth;
  std::vector<measure::MeasurementSet> stream;
};

Feeder13Run exact_stream(int slots, double sigma) {
  Feeder13Run run;
  const StateLayout layout(run.net);
  const auto specs = fase::testing::power_flow_channels(run.net, sigma);
  const MeasurementModel m(layout, specs);
  const auto base = run.net.snapshot_demand_pu();
  for (int k = 0; k < slots; ++k) {
    const double scale = 0.6 + 0.3 * std::sin(0.3 * k);
    std::vector<grid::cplx> d(base.size());
    for (std::size_t i = 0; i < d.size(); ++i)
      d[i] = scale * base[i];
    const auto x = layout.from_voltages(grid::bfs_power_flow(run.net, d, {1e-12, 200}).voltage);
    run.truth.push_back(x);
    const auto z = m.evaluate(x);
    measure::MeasurementSet set{k, {}};
    for (int r = 0; r < m.rows(); ++r)
      set.entries.push_back({specs[r], z[r], sigma * sigma});
    run.stream.push_back(std::move(set));
  }
  return run;
}

} // namespace

TEST(RunFase, NoiseFreeObservableTracksTruth) {
  auto run = exact_stream(12, 1e-7);
  FaseConfig cfg;
  cfg.correction.iterated = true;
  cfg.rate_from = "632";
  cfg.rate_to = "671";
  const auto trace = run_fase(run.net, run.stream, {}, {}, cfg);
  ASSERT_EQ(trace.slots.size(), 12u);
  for (std::size_t k = 0; k < trace.slots.size(); ++k) {
    const StateLayout layout(run.net);
    const Eigen::VectorXd err = trace.slots[k].x - run.truth[k];
    EXPECT_LT(err.tail(run.net.node_count()).lpNorm<Eigen::Infinity>(), 1e-6) << "slot " << k;
    EXPECT_LT(err.head(layout.angle_count()).lpNorm<Eigen::Infinity>(), 1e-6) << "slot " << k;
    EXPECT_LE(trace.slots[k].objective_post, trace.slots[k].objective_prior);
    EXPECT_GE(trace.slots[k].p_min_eig, -1e-10);
    for (const auto& s : trace.slots[k].params)
      EXPECT_GT(s.alpha, s.beta);
  }
}

TEST(RunFase, ErrorsCarrySlotIndex) {
  auto run = exact_stream(3, 1e-3);
  EXPECT_THROW(run_fase(run.net, {}, {}, {}, {}), DomainError);
  run.stream[2].entries.push_back(run.stream[2].entries.front());
  try {
    run_fase(run.net, run.stream, {}, {}, {});
    FAIL() << "expected duplicate error";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("slot 2"), std::string::npos) << e.what();
  }
  FaseConfig bad;
  bad.rate_from = "650";
  bad.rate_to = "671";
  EXPECT_THROW(run_fase(run.net, run.stream, {}, {}, bad), ConfigError);
}

TEST(RunFase, UnobservableInitialSlotIsReported) {
  auto run = exact_stream(1, 1e-3);
  run.stream[0].entries.resize(5);
  EXPECT_THROW(run_fase(run.net, run.stream, {}, {}, {}), UnobservableError);
}
