#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fase/eval/pipeline.hpp"

using namespace fase;
using namespace fase::eval;

namespace {

namespace fs = std::filesystem;

std::string data(const std::string& f) { return std::string(FASE_DATA_DIR) + "/" + f; }

std::string temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "fase_eval_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

VoltageSeries series(const std::string& label, const std::vector<double>& v, const std::vector<double>& a) {
  VoltageSeries s;
  auto& m = s[ChannelKey::parse(label)];
  for (std::size_t i = 0; i < v.size(); ++i)
    m[static_cast<long>(i)] = {v[i], a[i]};
  return s;
}

RunConfig tiny_config() {
  RunConfig c;
  c.network = data("four_bus.json");
  c.slots = 48;
  c.fase.q_proc = 1e-3;
  c.fase.correction.iterated = true;
  return c;
}

// P(R <= r) for the radius of a standard bivariate normal, by Simpson
// integration of the radial density r exp(-r^2 / 2).
double radial_cdf(double r) {
  const int n = 2000;
  const double h = r / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double t = i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += w * t * std::exp(-0.5 * t * t);
  }
  return s * h / 3.0;
}

double radial_quantile(double p) {
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (radial_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

} // namespace

TEST(Metrics, IdenticalSeriesGiveZeroError) {
  const auto s = series("2.1", {1.0, 0.98, 1.01}, {0.0, -1.0, -2.0});
  const auto r = compute_metrics(s, s);
  EXPECT_EQ(r.aggregate_v_mag.mae, 0.0);
  EXPECT_EQ(r.aggregate_v_mag.rmse, 0.0);
  EXPECT_EQ(r.aggregate_v_ang.rmse, 0.0);
  EXPECT_EQ(r.channels.size(), 1u);
}

TEST(Metrics, SymmetricUnitErrors) {
  const auto est = series("2.1", {2.0, 0.0}, {0.0, 0.0});
  const auto truth = series("2.1", {1.0, 1.0}, {0.0, 0.0});
  const auto r = compute_metrics(est, truth);
  EXPECT_DOUBLE_EQ(r.aggregate_v_mag.mae, 1.0);
  EXPECT_DOUBLE_EQ(r.aggregate_v_mag.rmse, 1.0);
  EXPECT_DOUBLE_EQ(r.aggregate_v_mag.mse, 1.0);
}

TEST(Metrics, AngleErrorsWrap) {
  EXPECT_NEAR(angle_diff_deg(179.0, -179.0), -2.0, 1e-12);
  EXPECT_NEAR(angle_diff_deg(-179.0, 179.0), 2.0, 1e-12);
  EXPECT_NEAR(angle_diff_deg(10.0, 370.0), 0.0, 1e-12);
}

TEST(Metrics, RejectsMissingOrDisjointTruth) {
  const auto est = series("2.1", {1.0}, {0.0});
  EXPECT_THROW(compute_metrics(est, series("3.1", {1.0}, {0.0})), DomainError);
  VoltageSeries shifted;
  shifted[ChannelKey::parse("2.1")][99] = {1.0, 0.0};
  EXPECT_THROW(compute_metrics(est, shifted), DomainError);
  EXPECT_THROW(compute_metrics({}, est), DomainError);
}

TEST(Metrics, RmseBoundsMaeAndAggregateIsChannelMean) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> n(0.0, 0.01);
  VoltageSeries est, truth;
  for (const char* l : {"2.1", "2.2", "3.3"})
    for (long k = 0; k < 50; ++k) {
      est[ChannelKey::parse(l)][k] = {1.0 + n(gen), n(gen)};
      truth[ChannelKey::parse(l)][k] = {1.0, 0.0};
    }
  const auto r = compute_metrics(est, truth);
  double mae = 0.0, rmse = 0.0;
  for (const auto& c : r.channels) {
    EXPECT_GE(c.v_mag.rmse, c.v_mag.mae);
    EXPECT_GE(c.v_ang.rmse, c.v_ang.mae);
    mae += c.v_mag.mae / 3.0;
    rmse += c.v_mag.rmse / 3.0;
  }
  EXPECT_NEAR(r.aggregate_v_mag.mae, mae, 1e-12);
  EXPECT_NEAR(r.aggregate_v_mag.rmse, rmse, 1e-12);
}

TEST(Metrics, ChannelKeyNotation) {
  const auto k = ChannelKey::parse("671.3");
  EXPECT_EQ(k.bus, "671");
  EXPECT_EQ(k.phase, grid::Phase::C);
  EXPECT_EQ(k.label(), "671.3");
  EXPECT_THROW(ChannelKey::parse("671"), ConfigError);
  EXPECT_THROW(ChannelKey::parse("671.4"), ConfigError);
}

TEST(Ellipse, IsotropicRadiusMatchesNumericQuantile) {
  // Whiten a random sample so its sample covariance is exactly the identity.
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n;
  Eigen::MatrixX2d x(400, 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    x.row(i) << n(gen), n(gen);
  x.rowwise() -= x.colwise().mean();
  const Eigen::Matrix2d cov = x.transpose() * x / static_cast<double>(x.rows() - 1);
  const Eigen::Matrix2d l = cov.llt().matrixL();
  const Eigen::MatrixX2d w = x * l.inverse().transpose();
  const auto e = error_ellipse(w, 0.95);
  const double r = radial_quantile(0.95);
  EXPECT_NEAR(r * r, 5.991, 1e-3);
  EXPECT_NEAR(e.major, r, 1e-8);
  EXPECT_NEAR(e.minor, r, 1e-8);
  EXPECT_EQ(e.shape, EllipseShape::ellipse);
}

TEST(Ellipse, AxesFollowCovariance) {
  // Points on a rotated ellipse with known second moments.
  const double th = 0.4, a = 3.0, b = 0.5;
  const int m = 360;
  Eigen::MatrixX2d x(m, 2);
  for (int i = 0; i < m; ++i) {
    const double t = 2.0 * std::numbers::pi * i / m;
    const double u = a * std::cos(t), v = b * std::sin(t);
    x.row(i) << std::cos(th) * u - std::sin(th) * v, std::sin(th) * u + std::cos(th) * v;
  }
  const auto e = error_ellipse(x, 0.5);
  const double q = radial_quantile(0.5);
  const double scale = std::sqrt(static_cast<double>(m) / (2.0 * (m - 1)));
  EXPECT_NEAR(e.major, a * scale * q, 1e-9);
  EXPECT_NEAR(e.minor, b * scale * q, 1e-9);
  EXPECT_NEAR(e.orientation, th, 1e-9);
}

TEST(Ellipse, DegenerateSamples) {
  Eigen::MatrixX2d same(5, 2);
  same.rowwise() = Eigen::RowVector2d(0.1, 2.0);
  const auto p = error_ellipse(same, 0.95);
  EXPECT_EQ(p.shape, EllipseShape::point);
  EXPECT_EQ(p.major, 0.0);

  Eigen::MatrixX2d line(6, 2);
  for (int i = 0; i < 6; ++i)
    line.row(i) << i, 2.0 * i;
  const auto s = error_ellipse(line, 0.95);
  EXPECT_EQ(s.shape, EllipseShape::segment);
  EXPECT_GT(s.major, 0.0);
  EXPECT_EQ(s.minor, 0.0);
  EXPECT_NEAR(std::tan(s.orientation), 2.0, 1e-9);

  EXPECT_THROW(error_ellipse(line.topRows(2), 0.95), DomainError);
  EXPECT_THROW(error_ellipse(line, 1.0), DomainError);
}

TEST(Ellipse, HigherConfidenceNests) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> n;
  Eigen::MatrixX2d x(100, 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double u = n(gen);
    x.row(i) << u, 0.5 * u + 0.2 * n(gen);
  }
  const auto lo = error_ellipse(x, 0.5), hi = error_ellipse(x, 0.95);
  EXPECT_LT(lo.major, hi.major);
  EXPECT_LT(lo.minor, hi.minor);
  EXPECT_DOUBLE_EQ(lo.orientation, hi.orientation);
}

TEST(Ellipse, PolygonIsClosedAndOnTheCurve) {
  Eigen::MatrixX2d x(4, 2);
  x << 1, 0, -1, 0, 0, 2, 0, -2;
  const auto e = error_ellipse(x, 0.95);
  const auto poly = ellipse_polygon(e, 64);
  ASSERT_EQ(poly.size(), 65u);
  EXPECT_EQ(poly.front(), poly.back());
  const Eigen::Matrix2d inv = e.covariance.inverse();
  const double q = chi2_2dof_quantile(0.95);
  for (const auto& p : poly) {
    const Eigen::Vector2d d = Eigen::Vector2d(p[0], p[1]) - e.center;
    EXPECT_NEAR(d.dot(inv * d), q, 1e-9);
  }
}

TEST(Pseudo, InjectionsFollowForecastSign) {
  const auto net = grid::load_network(data("four_bus.json"));
  const double base = net.phase_power_base_kva();
  forecast::ForecastSeries f;
  f.slots = {10, 11};
  f.buses = {"b", "c"};
  f.phases = {grid::Phase::A, grid::Phase::B};
  f.p_kw.resize(2, 2);
  f.p_kw << 30.0, -10.0, 40.0, 0.0;
  f.std_kw.resize(2, 2);
  f.std_kw << 3.0, 2.0, 4.0, 1.0;

  const auto rel = forecast::pseudo_measurements(net, f, {10, 11});
  ASSERT_EQ(rel.size(), 2u);
  ASSERT_EQ(rel[0].entries.size(), 4u);
  const auto& p = rel[0].entries[0];
  EXPECT_EQ(p.spec.kind, measure::Kind::pseudo_injection_p);
  EXPECT_EQ(p.origin, measure::Origin::pseudo);
  EXPECT_NEAR(p.value, -30.0 / base, 1e-15);
  EXPECT_NEAR(p.spec.sigma, 0.1 * 30.0 / base, 1e-15);
  EXPECT_NEAR(p.variance, p.spec.sigma * p.spec.sigma, 1e-20);
  // A net exporter shows up as a positive injection; zero demand hits the floor.
  EXPECT_GT(rel[0].entries[2].value, 0.0);
  EXPECT_DOUBLE_EQ(rel[1].entries[2].spec.sigma, 1e-4);
  // Q keeps the snapshot power factor (0.95 lagging at bus b).
  const double ratio = std::tan(std::acos(0.95));
  EXPECT_NEAR(rel[0].entries[1].value, -30.0 / base * ratio, 1e-12);

  forecast::PseudoOptions o;
  o.mode = forecast::PseudoSigma::forecast;
  const auto fc = forecast::pseudo_measurements(net, f, {11}, o);
  EXPECT_NEAR(fc[0].entries[0].spec.sigma, 4.0 / base, 1e-15);
}

TEST(Pseudo, RejectsUnusableColumnsAndSlots) {
  const auto net = grid::load_network(data("four_bus.json"));
  forecast::ForecastSeries f;
  f.slots = {10};
  f.buses = {"b"};
  f.phases = {grid::Phase::A};
  f.p_kw = Eigen::MatrixXd::Constant(1, 1, 5.0);
  f.std_kw = Eigen::MatrixXd::Constant(1, 1, 1.0);
  EXPECT_THROW(forecast::pseudo_measurements(net, f, {12}), SchemaError);
  f.buses = {"s"};
  EXPECT_THROW(forecast::pseudo_measurements(net, f, {10}), SchemaError);
  f.buses = {"nowhere"};
  EXPECT_THROW(forecast::pseudo_measurements(net, f, {10}), SchemaError);
  EXPECT_THROW(forecast::parse_pseudo_sigma("gaussian"), ConfigError);
}

TEST(Pipeline, ArtifactsRootFromEnvironment) {
  ::setenv(kArtifactsRootEnv, "/tmp/fase_root", 1);
  EXPECT_EQ(artifacts_dir("run1"), "/tmp/fase_root/run1");
  EXPECT_EQ(artifacts_dir("/abs/run"), "/abs/run");
  ::unsetenv(kArtifactsRootEnv);
  EXPECT_EQ(artifacts_dir("run1"), "artifacts/run1");
}

TEST(Pipeline, ConfigValidation) {
  auto c = tiny_config();
  EXPECT_NO_THROW(validate(c));
  auto bad = c;
  bad.scenario = "2040";
  EXPECT_THROW(validate(bad), ConfigError);
  bad = c;
  bad.network = "missing.json";
  EXPECT_THROW(validate(bad), ConfigError);
  bad = c;
  bad.first_slot = 10;
  EXPECT_THROW(validate(bad), ConfigError);
  bad = c;
  bad.fase.init = {0.2, 0.4};
  EXPECT_THROW(validate(bad), ConfigError);
  bad = c;
  bad.report_buses = {"b"};
  EXPECT_THROW(validate(bad), ConfigError);
}

TEST(Pipeline, TinyScenarioCompletes) {
  const auto dir = temp_dir("tiny");
  const auto r = run_scenario(tiny_config(), dir);
  for (const char* f : {files::config, files::weather, files::demand, files::profiles, files::truth,
                        files::measurements, files::availability, files::forecasts, files::estimates, files::traces,
                        "metrics.json", "metrics.csv"})
    EXPECT_TRUE(fs::is_regular_file(fs::path(dir) / f)) << f;
  for (const char* f : {plot_files::voltage, plot_files::parameters, plot_files::ellipses, plot_files::histograms})
    EXPECT_TRUE(fs::is_regular_file(fs::path(dir) / "plots" / f)) << f;
  for (const char* p : {"A", "B", "C"})
    for (const char* f : {"features.csv", "targets.csv", "manifest.json"})
      EXPECT_TRUE(fs::is_regular_file(fs::path(dir) / "features" / p / f)) << p << "/" << f;
  // 4 buses x 3 phases (slack included), 48 slots each.
  EXPECT_EQ(r.channels.size(), 12u);
  EXPECT_EQ(r.aggregate_v_mag.samples, 12 * 48);
  EXPECT_LT(r.aggregate_v_mag.rmse, 0.02);
  EXPECT_FALSE(r.forecaster.empty());
  EXPECT_TRUE(r.runtime_s.empty());
  const auto j = nlohmann::json::parse(slurp(fs::path(dir) / "metrics.json"));
  EXPECT_EQ(j.at("units").at("v_mag"), "pu");
  EXPECT_FALSE(j.contains("runtime_s"));
}

TEST(Pipeline, RunsAreReproducible) {
  const auto a = temp_dir("repro_a"), b = temp_dir("repro_b");
  run_scenario(tiny_config(), a);
  run_scenario(tiny_config(), b);
  int compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file())
      continue;
    const auto rel = fs::relative(e.path(), a);
    ASSERT_TRUE(fs::exists(fs::path(b) / rel)) << rel;
    EXPECT_EQ(slurp(e.path()), slurp(fs::path(b) / rel)) << rel;
    ++compared;
  }
  EXPECT_GE(compared, 20);
}

TEST(Pipeline, SeedChangesMeasurements) {
  const auto a = temp_dir("seed_a"), b = temp_dir("seed_b");
  auto c = tiny_config();
  c.slots = 4;
  run_scenario(c, a);
  c.seeds.noise = 99;
  run_scenario(c, b);
  EXPECT_EQ(slurp(fs::path(a) / files::truth), slurp(fs::path(b) / files::truth));
  EXPECT_NE(slurp(fs::path(a) / files::measurements), slurp(fs::path(b) / files::measurements));
}

TEST(Pipeline, FutureScenarioRuns) {
  const auto dir = temp_dir("s2035");
  auto c = tiny_config();
  c.scenario = "2035";
  c.slots = 8;
  const auto r = run_scenario(c, dir);
  EXPECT_EQ(r.aggregate_v_mag.samples, 12 * 8);
  const auto j = nlohmann::json::parse(slurp(fs::path(dir) / files::config));
  EXPECT_EQ(j.at("composition").at("ev_count"), 38);
}

TEST(Pipeline, StageErrorsNameTheStage) {
  const auto dir = temp_dir("bad_forecasts");
  const auto path = dir + "/external.csv";
  std::ofstream(path) << "when,where,what\n";
  auto c = tiny_config();
  c.forecaster = "external";
  c.forecasts_path = path;
  try {
    run_scenario(c, dir);
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("stage forecasts"), std::string::npos) << e.what();
  }
}

TEST(Pipeline, ExternalForecastsRoundTrip) {
  // Feeding a run's own forecasts back as an external file reproduces it.
  const auto a = temp_dir("ext_a"), b = temp_dir("ext_b");
  auto c = tiny_config();
  c.slots = 8;
  run_scenario(c, a);
  c.forecaster = "external";
  c.forecasts_path = a + "/" + files::forecasts;
  run_scenario(c, b);
  EXPECT_EQ(slurp(fs::path(a) / files::estimates), slurp(fs::path(b) / files::estimates));
}

TEST(Plots, MissingTraceIsNamed) {
  const auto dir = temp_dir("plots");
  auto c = tiny_config();
  c.slots = 4;
  run_scenario(c, dir);
  const auto written = emit_plots(dir, report_channels({"b.1", "c.3"}), c.clock());
  ASSERT_EQ(written.size(), 4u);
  EXPECT_NE(slurp(written[0]).find("c.3"), std::string::npos);
  EXPECT_THROW(emit_plots(dir, report_channels({"zz.1"}), c.clock()), ConfigError);
  fs::remove(fs::path(dir) / files::traces);
  try {
    emit_plots(dir, {}, c.clock());
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find(files::traces), std::string::npos) << e.what();
  }
}
