#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fase/der/scenario.hpp"
#include "fase/estimation/fase_runner.hpp"
#include "fase/eval/artifacts.hpp"
#include "fase/eval/metrics.hpp"
#include "fase/eval/plots.hpp"
#include "fase/forecast/baseline.hpp"
#include "fase/forecast/exchange.hpp"
#include "fase/forecast/features.hpp"
#include "fase/forecast/pseudo.hpp"
#include "fase/forecast/supervised.hpp"
#include "fase/grid/network_io.hpp"
#include "fase/measure/sampling.hpp"
#include "fase/measure/stream_io.hpp"
#include "fase/measure/truth.hpp"

namespace fase::eval {

inline constexpr const char* kArtifactsRootEnv = "FASE_ARTIFACTS_ROOT";

struct SeedConfig {
  std::uint64_t profiles = 1;
  std::uint64_t scenario = 2;
  std::uint64_t noise = 3;
  std::uint64_t meters = 4;
};

/// Everything a run needs. Slots index the half-hour grid from 1 January of
/// the library's calendar year; the estimation range is [first_slot,
/// first_slot + slots) and the forecaster sees `window` slots of history before it.
struct RunConfig {
  std::string network;
  std::string channels;           ///< channel profile CSV; empty selects the default profile
  std::string scenario = "2023";  ///< 2023 | 2035 | 2050 | custom
  der::ScenarioComposition custom; ///< used when scenario = custom
  SeedConfig seeds;
  long first_slot = 480;
  long slots = 200;
  long window = 48;
  der::LibraryConfig library = [] {
    der::LibraryConfig l;
    l.days = 21;
    l.size_per_category = 30;
    l.ev_size = 20;
    l.hvac_size = 20;
    return l;
  }();
  int units_per_node = 100;
  int meters_per_node = 10;
  double export_cap_kw = 3.68;
  double aggregation_sigma = 0.03;
  double load_scale = 1.0; ///< multiplies every node's demand
  est::FaseConfig fase;
  measure::NoiseProfile noise;
  double meter_availability = 0.4;
  std::string forecaster = "baseline"; ///< baseline | external
  std::string forecasts_path;          ///< external forecasts CSV
  forecast::PseudoOptions pseudo;
  forecast::BaselineParams baseline;
  forecast::SplitRatios splits;
  std::vector<std::string> report_buses; ///< "bus.N"; empty selects the defaults
  bool record_runtime = false;           ///< adds wall-clock seconds to metrics.json

  long demand_first() const { return first_slot - window; }
  long demand_count() const { return slots + window; }
  SlotClock clock() const { return SlotClock(library.calendar_year); }
};

inline der::ScenarioComposition composition(const RunConfig& c) {
  if (c.scenario == "custom")
    return c.custom;
  if (c.scenario == "2023" || c.scenario == "2035" || c.scenario == "2050")
    return der::scenario_for_year(std::stoi(c.scenario));
  throw ConfigError("scenario must be 2023, 2035, 2050 or custom, got '" + c.scenario + "'");
}

/// Checks the configuration; file references must exist.
inline void validate(const RunConfig& c) {
  auto need_file = [](const std::string& path, const char* what) {
    if (path.empty() || !std::filesystem::is_regular_file(path))
      throw ConfigError(std::string(what) + " '" + path + "' does not exist");
  };
  need_file(c.network, "network file");
  if (!c.channels.empty())
    need_file(c.channels, "channel profile");
  if (c.forecaster == "external")
    need_file(c.forecasts_path, "forecasts file");
  else if (c.forecaster != "baseline")
    throw ConfigError("forecaster must be 'baseline' or 'external', got '" + c.forecaster + "'");
  composition(c).validate();
  if (c.slots < 1)
    throw ConfigError("slot range is empty");
  if (c.window < 1)
    throw ConfigError("window must be at least 1");
  if (c.demand_first() < 0)
    throw ConfigError("first_slot must be at least the window length (" + std::to_string(c.window) + ")");
  if (c.first_slot + c.slots > static_cast<long>(c.library.days) * kSlotsPerDay)
    throw ConfigError("slot range ends after the profile library (" + std::to_string(c.library.days) + " days)");
  if (!(c.load_scale > 0.0))
    throw ConfigError("load_scale must be positive");
  if (!(c.meter_availability >= 0.0 && c.meter_availability <= 1.0))
    throw ConfigError("meter availability must lie in [0, 1]");
  c.noise.validate();
  c.pseudo.validate();
  c.splits.validate();
  c.fase.tuner.validate();
  try {
    est::check_smoothing(c.fase.init);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("init: ") + e.what());
  }
  if (!(c.fase.q_proc >= 0.0))
    throw ConfigError("q_proc must be non-negative");
  for (const auto& b : c.report_buses)
    ChannelKey::parse(b);
}

/// Resolves an output directory: absolute paths are kept, relative ones go
/// under $FASE_ARTIFACTS_ROOT (default "artifacts").
inline std::string artifacts_dir(const std::string& out) {
  const std::filesystem::path p(out);
  if (p.is_absolute())
    return p.string();
  const char* root = std::getenv(kArtifactsRootEnv);
  return (std::filesystem::path(root && *root ? root : "artifacts") / p).string();
}

/// Rate branch of the configuration, or the first branch leaving the slack.
inline std::pair<std::string, std::string> rate_branch(const RunConfig& c, const grid::NetworkModel& net) {
  if (!c.fase.rate_from.empty()) {
    if (!net.find_branch(c.fase.rate_from, c.fase.rate_to))
      throw ConfigError("unknown rate branch " + c.fase.rate_from + "->" + c.fase.rate_to);
    return {c.fase.rate_from, c.fase.rate_to};
  }
  const auto& kids = net.child_branches(net.slack_index());
  if (kids.empty())
    throw ConfigError("network has no branch leaving the slack bus");
  const auto& br = net.branches()[static_cast<std::size_t>(kids.front())];
  return {br.from, br.to};
}

/// Default real-time profile: |V| and angle at the slack bus, P and Q on every
/// branch leaving it, and every phase current on the rate branch.
inline std::vector<measure::Channel> default_channels(const RunConfig& c, const grid::NetworkModel& net) {
  const auto rb = rate_branch(c, net);
  std::vector<std::pair<std::string, std::string>> flows;
  for (int k : net.child_branches(net.slack_index()))
    flows.emplace_back(net.branches()[static_cast<std::size_t>(k)].from, net.branches()[static_cast<std::size_t>(k)].to);
  const auto& br = net.branches()[static_cast<std::size_t>(net.find_branch(rb.first, rb.second)->first)];
  return measure::real_time_profile(net, net.buses()[static_cast<std::size_t>(net.slack_index())].id, flows, rb,
                                    br.phases);
}

/// Runs `f`, prefixing any toolkit error with the stage name and keeping its class.
template <class F>
void run_stage(const std::string& name, F&& f) {
  const std::string at = "stage " + name + ": ";
  try {
    f();
  } catch (const UnobservableError& e) {
    throw UnobservableError(at + e.what(), e.null_dimension);
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(at + e.what());
  } catch (const SchemaError& e) {
    throw SchemaError(at + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(at + e.what());
  } catch (const DomainError& e) {
    throw DomainError(at + e.what());
  } catch (const Error& e) {
    throw Error(at + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    throw Error(at + e.what());
  }
}

inline std::string in_dir(const std::string& dir, const char* name) { return dir + "/" + name; }

/// Stage profiles: weather, per-node demand and smart-meter households over
/// the demand range (estimation range plus forecaster history).
inline void stage_profiles(const RunConfig& c, const std::string& dir) {
  const auto net = grid::load_network(c.network);
  auto lib_cfg = c.library;
  lib_cfg.seed = c.seeds.profiles;
  der::ProfileLibrary lib(lib_cfg);
  der::ScenarioConfig sc;
  sc.composition = composition(c);
  sc.units_per_node = c.units_per_node;
  sc.meters_per_node = c.meters_per_node;
  sc.export_cap_kw = c.export_cap_kw;
  sc.sigma_rel = c.aggregation_sigma;
  sc.seed = c.seeds.scenario;
  const auto scen = der::build_scenario(net, sc, lib);

  const long first = c.demand_first(), count = c.demand_count();
  const auto b = static_cast<std::ptrdiff_t>(first), e = static_cast<std::ptrdiff_t>(first + count);
  const auto clock = c.clock();
  NodeTable d;
  d.first = first;
  d.count = count;
  MeterTable m;
  m.first = first;
  m.count = count;
  for (const auto& nd : scen.nodes) {
    const auto& ref = net.node(nd.node);
    const ChannelKey key{net.buses()[static_cast<std::size_t>(ref.bus)].id, ref.phase};
    auto& p = d.p[key];
    auto& q = d.q[key];
    for (std::ptrdiff_t k = b; k < e; ++k) {
      p.push_back(nd.p_kw[static_cast<std::size_t>(k)] * c.load_scale);
      q.push_back(nd.q_kvar[static_cast<std::size_t>(k)] * c.load_scale);
    }
    for (std::size_t j = 0; j < nd.meter_kw.size(); ++j) {
      m.ids.push_back(measure::meter_id(net, nd.node, static_cast<int>(j)));
      m.kw.emplace_back(nd.meter_kw[j].begin() + b, nd.meter_kw[j].begin() + e);
    }
  }
  WeatherTable w;
  w.first = first;
  w.ambient_c.assign(lib.weather().ambient_c.begin() + b, lib.weather().ambient_c.begin() + e);
  w.irradiance_wm2.assign(lib.weather().irradiance_wm2.begin() + b, lib.weather().irradiance_wm2.begin() + e);
  write_weather(in_dir(dir, files::weather), w, clock);
  write_demand(in_dir(dir, files::demand), d, clock);
  write_meter_profiles(in_dir(dir, files::profiles), m, clock);
}

/// Stage powerflow: true states over the demand range, the real-time
/// measurement stream over the estimation range and the meter availability mask.
inline void stage_powerflow(const RunConfig& c, const std::string& dir) {
  const auto net = grid::load_network(c.network);
  const auto clock = c.clock();
  const auto d = read_demand(in_dir(dir, files::demand), clock);
  if (d.first > c.demand_first() || d.first + d.count < c.first_slot + c.slots)
    throw SchemaError(in_dir(dir, files::demand) + " does not cover the configured slot range");
  const auto truth = measure::generate_truth(net, measure::demand_from_series(demand_pu(net, d), d.first), d.first,
                                             d.count);
  write_truth(in_dir(dir, files::truth), net, truth, clock);
  write_truth_currents(in_dir(dir, files::truth_currents), net, truth, clock);

  const auto channels = c.channels.empty() ? default_channels(c, net) : measure::read_channel_profile(c.channels);
  measure::write_channel_profile(in_dir(dir, files::channels), channels);
  std::vector<measure::MeasurementSet> stream;
  for (long k = c.first_slot; k < c.first_slot + c.slots; ++k) {
    const auto& sol = truth.at(k);
    stream.push_back(
        measure::sample_measurements(net, sol, measure::realize_specs(net, sol, channels, c.noise), c.seeds.noise, k));
  }
  measure::write_measurement_stream(in_dir(dir, files::measurements), stream, clock);

  const auto meters = read_meter_profiles(in_dir(dir, files::profiles), clock);
  const auto mask =
      measure::availability_mask(meters.ids, {c.meter_availability, c.seeds.meters}, meters.first, meters.count);
  measure::write_availability_mask(in_dir(dir, files::availability), mask, clock);
}

inline std::string features_dir(const std::string& dir, Phase p) {
  return dir + "/" + files::features + "/" + phase_str(p);
}

/// Stage features: one training export per phase that carries demand.
inline void stage_features(const RunConfig& c, const std::string& dir) {
  const auto net = grid::load_network(c.network);
  const auto clock = c.clock();
  const auto d = read_demand(in_dir(dir, files::demand), clock);
  const auto w = read_weather(in_dir(dir, files::weather), clock);
  const auto rb = rate_branch(c, net);
  const auto current = read_branch_current_pu(in_dir(dir, files::truth_currents), net, rb.first, rb.second, clock);
  const auto meters = read_meter_profiles(in_dir(dir, files::profiles), clock);

  forecast::FeatureInputs in;
  in.first_slot = d.first;
  in.count = d.count;
  in.clock = clock;
  in.mask = measure::read_availability_mask(in_dir(dir, files::availability), clock);
  for (long k = d.first; k < d.first + d.count; ++k) {
    const long i = k - w.first;
    if (i < 0 || i >= static_cast<long>(w.irradiance_wm2.size()))
      throw SchemaError(in_dir(dir, files::weather) + ": no weather at " + clock.timestamp(k));
    in.irradiance_wm2.push_back(w.irradiance_wm2[static_cast<std::size_t>(i)]);
    const auto ci = current.find(k);
    if (ci == current.end())
      throw SchemaError(in_dir(dir, files::truth_currents) + ": no current on " + rb.first + "->" + rb.second + " at " +
                        clock.timestamp(k));
    in.branch_current_pu.push_back(ci->second);
  }
  for (std::size_t j = 0; j < meters.ids.size(); ++j) {
    if (meters.first != d.first || meters.count != d.count)
      throw SchemaError(in_dir(dir, files::profiles) + ": meter range differs from the demand range");
    in.meters.push_back({meters.ids[j], meter_owner(meters.ids[j]).phase, meters.kw[j]});
  }
  for (const auto& [key, p] : d.p)
    in.targets.push_back({key.bus, key.phase, p});
  for (Phase ph : grid::kPhases) {
    const auto frame = forecast::build_features(in, ph);
    if (frame.target_ids.empty())
      continue;
    const auto ds = forecast::make_supervised(frame.features, frame.targets, c.window, c.splits);
    forecast::export_training_data(features_dir(dir, ph), frame, ds, clock);
  }
}

/// Concatenates per-phase forecasts that share their slots.
inline forecast::ForecastSeries merge_forecasts(const std::vector<forecast::ForecastSeries>& parts) {
  if (parts.empty())
    throw SchemaError("no forecasts to merge");
  forecast::ForecastSeries out;
  out.slots = parts.front().slots;
  Eigen::Index cols = 0;
  for (const auto& f : parts) {
    if (f.slots != out.slots)
      throw SchemaError("per-phase forecasts cover different slots");
    cols += f.p_kw.cols();
  }
  out.p_kw.resize(static_cast<Eigen::Index>(out.slots.size()), cols);
  out.std_kw.resize(static_cast<Eigen::Index>(out.slots.size()), cols);
  Eigen::Index at = 0;
  for (const auto& f : parts) {
    out.p_kw.middleCols(at, f.p_kw.cols()) = f.p_kw;
    out.std_kw.middleCols(at, f.p_kw.cols()) = f.std_kw;
    out.buses.insert(out.buses.end(), f.buses.begin(), f.buses.end());
    out.phases.insert(out.phases.end(), f.phases.begin(), f.phases.end());
    at += f.p_kw.cols();
  }
  return out;
}

/// Stage forecasts: baseline forecasts from the training exports, or an
/// external forecast file checked against the estimation range.
inline void stage_forecasts(const RunConfig& c, const std::string& dir) {
  const auto clock = c.clock();
  forecast::ForecastSeries f;
  if (c.forecaster == "external") {
    f = forecast::import_forecasts(c.forecasts_path, clock);
  } else {
    std::vector<forecast::ForecastSeries> parts;
    for (Phase ph : grid::kPhases) {
      const auto fd = features_dir(dir, ph);
      if (!std::filesystem::exists(fd))
        continue;
      const auto td = forecast::import_training_data(fd, clock);
      parts.push_back(forecast::baseline_forecast(td.frame, td.dataset, c.baseline));
    }
    f = merge_forecasts(parts);
  }
  for (long k = c.first_slot; k < c.first_slot + c.slots; ++k)
    if (f.row(k) < 0)
      throw SchemaError("forecasts: no forecast for " + clock.timestamp(k));
  forecast::write_forecasts(in_dir(dir, files::forecasts), f, clock);
}

/// In-memory inputs of the estimator, rebuilt from a run's artifacts.
struct FaseInputs {
  grid::NetworkModel net;
  std::vector<measure::MeasurementSet> real_time;
  std::vector<measure::MeasurementSet> pseudo;
  std::vector<measure::MeasurementSpec> virtual_zero;
  est::FaseConfig fase;
};

inline FaseInputs load_fase_inputs(const RunConfig& c, const std::string& dir) {
  const auto clock = c.clock();
  FaseInputs in{grid::load_network(c.network), {}, {}, {}, c.fase};
  in.real_time = measure::read_measurement_stream(in_dir(dir, files::measurements), clock);
  const auto f = forecast::import_forecasts(in_dir(dir, files::forecasts), clock);
  std::vector<long> slots;
  for (const auto& s : in.real_time)
    slots.push_back(s.slot);
  in.pseudo = forecast::pseudo_measurements(in.net, f, slots, c.pseudo);
  std::vector<int> demand_nodes;
  for (std::size_t j = 0; j < f.buses.size(); ++j)
    demand_nodes.push_back(in.net.node_index(f.buses[j], f.phases[j]));
  in.virtual_zero = measure::virtual_zero_specs(in.net, demand_nodes, c.noise.virtual_sigma);
  const auto rb = rate_branch(c, in.net);
  in.fase.rate_from = rb.first;
  in.fase.rate_to = rb.second;
  return in;
}

/// Stage fase: estimates and smoothing-parameter traces.
inline est::FaseTrace stage_fase(const RunConfig& c, const std::string& dir) {
  const auto in = load_fase_inputs(c, dir);
  auto trace = est::run_fase(in.net, in.real_time, in.pseudo, in.virtual_zero, in.fase);
  const auto clock = c.clock();
  write_estimates(in_dir(dir, files::estimates), in.net, trace, read_truth(in_dir(dir, files::truth), clock), clock);
  write_traces(in_dir(dir, files::traces), trace, clock);
  return trace;
}

/// Stage evaluate: voltage and forecaster metrics.
inline MetricsReport stage_evaluate(const RunConfig& c, const std::string& dir) {
  const auto clock = c.clock();
  const auto [est, truth] = read_estimates(in_dir(dir, files::estimates), clock);
  auto r = compute_metrics(est, truth);
  const auto f = forecast::import_forecasts(in_dir(dir, files::forecasts), clock);
  const auto d = read_demand(in_dir(dir, files::demand), clock);
  std::map<ChannelKey, std::map<long, double>> fc, actual;
  for (std::size_t j = 0; j < f.buses.size(); ++j) {
    const ChannelKey key{f.buses[j], f.phases[j]};
    for (long k = c.first_slot; k < c.first_slot + c.slots; ++k) {
      const long row = f.row(k);
      if (row >= 0)
        fc[key][k] = f.p_kw(row, static_cast<Eigen::Index>(j));
    }
  }
  for (const auto& [key, p] : d.p)
    for (long k = 0; k < d.count; ++k)
      actual[key][d.first + k] = p[static_cast<std::size_t>(k)];
  add_forecaster_metrics(r, fc, actual);
  return r;
}

inline nlohmann::ordered_json config_json(const RunConfig& c) {
  const auto comp = composition(c);
  nlohmann::ordered_json j;
  j["network"] = c.network;
  j["channels"] = c.channels;
  j["scenario"] = c.scenario;
  j["composition"] = {{"shares", comp.shares}, {"ev_count", comp.ev_count}, {"hvac_count", comp.hvac_count}};
  j["seeds"] = {{"profiles", c.seeds.profiles}, {"scenario", c.seeds.scenario}, {"noise", c.seeds.noise},
                {"meters", c.seeds.meters}};
  j["slots"] = {{"first", c.first_slot}, {"count", c.slots}, {"window", c.window}};
  j["library"] = {{"days", c.library.days},
                  {"calendar_year", c.library.calendar_year},
                  {"size_per_category", c.library.size_per_category},
                  {"ev_size", c.library.ev_size},
                  {"hvac_size", c.library.hvac_size}};
  j["scenario_build"] = {{"units_per_node", c.units_per_node},   {"meters_per_node", c.meters_per_node},
                         {"export_cap_kw", c.export_cap_kw},     {"aggregation_sigma", c.aggregation_sigma},
                         {"load_scale", c.load_scale}};
  j["tuner"] = {{"tau", c.fase.tuner.tau}, {"epsilon", c.fase.tuner.epsilon}, {"upsilon", c.fase.tuner.upsilon}};
  j["init"] = {{"alpha0", c.fase.init.alpha}, {"beta0", c.fase.init.beta}};
  j["q_proc"] = c.fase.q_proc;
  j["iekf"] = {{"enabled", c.fase.correction.iterated},
               {"max_iter", c.fase.correction.max_iter},
               {"tol", c.fase.correction.tol}};
  j["adaptive"] = c.fase.adaptive;
  j["rate_branch"] = {c.fase.rate_from, c.fase.rate_to};
  j["noise"] = {{"v_mag", c.noise.v_mag},           {"v_ang", c.noise.v_ang},
                {"flow_rel", c.noise.flow_rel},     {"flow_floor", c.noise.flow_floor},
                {"current_rel", c.noise.current_rel}, {"current_floor", c.noise.current_floor},
                {"virtual_sigma", c.noise.virtual_sigma}};
  j["meter_availability"] = c.meter_availability;
  j["forecaster"] = {{"mode", c.forecaster}, {"path", c.forecasts_path}};
  j["pseudo"] = {{"sigma", c.pseudo.mode == forecast::PseudoSigma::relative ? "relative" : "forecast"},
                 {"rel", c.pseudo.rel},
                 {"floor_pu", c.pseudo.floor_pu}};
  j["report_buses"] = c.report_buses;
  return j;
}

/// Full pipeline into `dir`: profiles, power flow and measurements, feature
/// export, forecasts, estimation, metrics and plot bundles. Deterministic
/// under the configured seeds.
inline MetricsReport run_scenario(const RunConfig& c, const std::string& dir) {
  run_stage("config", [&] { validate(c); });
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(in_dir(dir, files::config));
    out << config_json(c).dump(2) << '\n';
  }
  std::map<std::string, double> runtime;
  auto timed = [&](const std::string& name, auto&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    run_stage(name, f);
    runtime[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  timed("profiles", [&] { stage_profiles(c, dir); });
  timed("powerflow", [&] { stage_powerflow(c, dir); });
  timed("features", [&] { stage_features(c, dir); });
  timed("forecasts", [&] { stage_forecasts(c, dir); });
  timed("fase", [&] { stage_fase(c, dir); });
  MetricsReport r;
  timed("evaluate", [&] { r = stage_evaluate(c, dir); });
  if (c.record_runtime)
    r.runtime_s = runtime;
  run_stage("evaluate", [&] { write_metrics(dir, r); });
  run_stage("plots", [&] { emit_plots(dir, report_channels(c.report_buses), c.clock()); });
  return r;
}

} // namespace fase::eval
