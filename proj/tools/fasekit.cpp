// fasekit: command-line front end of the FASE toolkit.
//
// Every option can come from an INI file (--config); a key `k` in section
// `[s]` sets option `--s.k`. Options on the command line override the file.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fase/eval/pipeline.hpp"

namespace {

using namespace fase;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty())
      out.push_back(item);
  return out;
}

/// INI entries as `--section.key value` arguments, placed before the real
/// command line so that later (command-line) values win.
std::vector<std::string> config_args(const std::string& path) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path);
  } catch (const CLI::Error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  std::vector<std::string> out;
  for (const auto& it : items) {
    if (it.name == "++" || it.name == "--")
      continue; // section markers
    std::string name;
    for (const auto& p : it.parents)
      if (p != "default")
        name += p + ".";
    name += it.name;
    std::string value;
    for (const auto& v : it.inputs)
      value += (value.empty() ? "" : ",") + v;
    out.push_back("--" + name + "=" + value);
  }
  return out;
}

struct Cli {
  eval::RunConfig cfg;
  std::string out = "run";
  std::string config_file;
  std::string shares;
  std::string rate_branch;
  std::string report_buses;
  std::string pseudo_sigma = "relative";
};

void bind(CLI::App& app, Cli& c) {
  auto& r = c.cfg;
  auto opt = [&](const std::string& name, auto& target, const std::string& help) {
    app.add_option(name, target, help)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->capture_default_str();
  };
  app.add_option("--config", c.config_file, "INI file with [section] key = value entries");
  opt("--out", c.out, "artifacts directory, relative to $FASE_ARTIFACTS_ROOT (default ./artifacts)");
  opt("--network", r.network, "feeder JSON");
  opt("--channels", r.channels, "real-time channel profile CSV (kind,bus,phase); default: substation profile");
  opt("--scenario", r.scenario, "2023 | 2035 | 2050 | custom");
  opt("--scenario.shares", c.shares, "custom shares: household,pv,pv_bess,commercial (per 100 units)");
  opt("--scenario.ev_count", r.custom.ev_count, "custom EV count per 100 units");
  opt("--scenario.hvac_count", r.custom.hvac_count, "custom HVAC count per 100 units");
  opt("--seeds.profiles", r.seeds.profiles, "profile library seed");
  opt("--seeds.scenario", r.seeds.scenario, "scenario assembly seed");
  opt("--seeds.noise", r.seeds.noise, "measurement noise seed");
  opt("--seeds.meters", r.seeds.meters, "smart-meter availability seed");
  opt("--slots.first", r.first_slot, "first estimated slot (half hours from 1 January)");
  opt("--slots.count", r.slots, "number of estimated slots");
  opt("--slots.window", r.window, "forecaster history window (slots)");
  opt("--library.days", r.library.days, "profile library length in days");
  opt("--library.year", r.library.calendar_year, "calendar year of the slot grid");
  opt("--library.size", r.library.size_per_category, "profiles per category");
  opt("--library.ev_size", r.library.ev_size, "EV profiles");
  opt("--library.hvac_size", r.library.hvac_size, "HVAC profiles");
  opt("--build.units_per_node", r.units_per_node, "aggregated units per loaded bus-phase");
  opt("--build.meters_per_node", r.meters_per_node, "smart meters per loaded bus-phase");
  opt("--build.export_cap_kw", r.export_cap_kw, "household export cap");
  opt("--build.aggregation_sigma", r.aggregation_sigma, "relative aggregation error");
  opt("--build.load_scale", r.load_scale, "multiplier on every node's demand");
  opt("--tuner.tau", r.fase.tuner.tau, "beta step");
  opt("--tuner.epsilon", r.fase.tuner.epsilon, "alpha step");
  opt("--tuner.upsilon", r.fase.tuner.upsilon, "rate-change threshold (pu per slot)");
  opt("--init.alpha0", r.fase.init.alpha, "initial alpha");
  opt("--init.beta0", r.fase.init.beta, "initial beta");
  opt("--q_proc", r.fase.q_proc, "process noise variance");
  opt("--iekf.enabled", r.fase.correction.iterated, "iterate the correction step");
  opt("--iekf.max_iter", r.fase.correction.max_iter, "iteration cap");
  opt("--iekf.tol", r.fase.correction.tol, "step tolerance");
  opt("--fase.adaptive", r.fase.adaptive, "adapt alpha and beta");
  opt("--fase.rate_branch", c.rate_branch, "branch 'from->to' whose current drives the tuner");
  opt("--noise.v_mag", r.noise.v_mag, "|V| sigma (pu)");
  opt("--noise.v_ang", r.noise.v_ang, "angle sigma (rad)");
  opt("--noise.flow_rel", r.noise.flow_rel, "relative flow sigma");
  opt("--noise.flow_floor", r.noise.flow_floor, "flow sigma floor (pu)");
  opt("--noise.current_rel", r.noise.current_rel, "relative current sigma");
  opt("--noise.current_floor", r.noise.current_floor, "current sigma floor (pu)");
  opt("--noise.virtual_sigma", r.noise.virtual_sigma, "zero-injection sigma (pu)");
  opt("--meters.availability", r.meter_availability, "probability a smart meter reports in a slot");
  opt("--forecaster.mode", r.forecaster, "baseline | external");
  opt("--forecaster.path", r.forecasts_path, "external forecasts CSV");
  opt("--pseudo.sigma", c.pseudo_sigma, "relative | forecast");
  opt("--pseudo.rel", r.pseudo.rel, "relative pseudo-measurement sigma");
  opt("--pseudo.floor", r.pseudo.floor_pu, "pseudo-measurement sigma floor (pu)");
  opt("--report.buses", c.report_buses, "bus-phases for plots, e.g. 671.1,675.3");
  app.add_flag("--timing", r.record_runtime, "record stage wall-clock times in metrics.json");
}

void finish(Cli& c) {
  auto& r = c.cfg;
  if (!c.shares.empty()) {
    const auto v = split_list(c.shares);
    if (v.size() != 4)
      throw ConfigError("scenario.shares needs four comma-separated values");
    for (std::size_t i = 0; i < 4; ++i)
      r.custom.shares[i] = csv::to_double(v[i], "scenario.shares");
  }
  if (!c.rate_branch.empty()) {
    const auto arrow = c.rate_branch.find("->");
    if (arrow == std::string::npos)
      throw ConfigError("fase.rate_branch must look like 'from->to'");
    r.fase.rate_from = c.rate_branch.substr(0, arrow);
    r.fase.rate_to = c.rate_branch.substr(arrow + 2);
  }
  r.report_buses = split_list(c.report_buses);
  r.pseudo.mode = forecast::parse_pseudo_sigma(c.pseudo_sigma);
}

void print_summary(const eval::MetricsReport& m) {
  std::printf("v_mag  MAE %.6g pu   RMSE %.6g pu\n", m.aggregate_v_mag.mae, m.aggregate_v_mag.rmse);
  std::printf("v_ang  MAE %.6g deg  RMSE %.6g deg\n", m.aggregate_v_ang.mae, m.aggregate_v_ang.rmse);
  if (!m.forecaster.empty())
    std::printf("demand forecast MAE %.6g kW\n", m.aggregate_forecaster.mae);
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e))
    return 2;
  if (dynamic_cast<const ConvergenceError*>(&e) || dynamic_cast<const UnobservableError*>(&e))
    return 3;
  if (dynamic_cast<const SchemaError*>(&e))
    return 4;
  return 1;
}

} // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size())
        path = args[i + 1];
      else if (args[i].rfind("--config=", 0) == 0)
        path = args[i].substr(9);
      if (!path.empty()) {
        auto extra = config_args(path);
        args.insert(args.begin(), extra.begin(), extra.end());
        break;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "fasekit: " << e.what() << '\n';
    return exit_code(e);
  }

  CLI::App app{"Forecasting-aided state estimation toolkit", "fasekit"};
  app.fallthrough();
  app.require_subcommand(1);
  Cli c;
  bind(app, c);
  struct Command {
    const char* name;
    const char* help;
  };
  const std::vector<Command> commands{
      {"generate-profiles", "weather, node demand and smart-meter profiles"},
      {"run-powerflow", "true states, real-time measurements and meter availability"},
      {"export-features", "forecaster training exports (features.csv, targets.csv, manifest.json)"},
      {"import-forecasts", "baseline forecasts, or an external forecasts.csv checked and imported"},
      {"run-fase", "forecasting-aided state estimation"},
      {"evaluate", "error metrics (metrics.json, metrics.csv)"},
      {"emit-plots", "plot-ready CSV bundles"},
      {"run-scenario", "every stage in order"},
  };
  for (const auto& cmd : commands)
    app.add_subcommand(cmd.name, cmd.help);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    finish(c);
    const auto& cfg = c.cfg;
    const std::string dir = eval::artifacts_dir(c.out);
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "run-scenario") {
      const auto m = eval::run_scenario(cfg, dir);
      print_summary(m);
    } else {
      eval::run_stage("config", [&] { eval::validate(cfg); });
      std::filesystem::create_directories(dir);
      if (cmd == "generate-profiles") {
        std::ofstream(dir + "/" + eval::files::config) << eval::config_json(cfg).dump(2) << '\n';
        eval::run_stage("profiles", [&] { eval::stage_profiles(cfg, dir); });
      } else if (cmd == "run-powerflow") {
        eval::run_stage("powerflow", [&] { eval::stage_powerflow(cfg, dir); });
      } else if (cmd == "export-features") {
        eval::run_stage("features", [&] { eval::stage_features(cfg, dir); });
      } else if (cmd == "import-forecasts") {
        eval::run_stage("forecasts", [&] { eval::stage_forecasts(cfg, dir); });
      } else if (cmd == "run-fase") {
        eval::run_stage("fase", [&] { eval::stage_fase(cfg, dir); });
      } else if (cmd == "evaluate") {
        eval::run_stage("evaluate", [&] {
          const auto m = eval::stage_evaluate(cfg, dir);
          eval::write_metrics(dir, m);
          print_summary(m);
        });
      } else if (cmd == "emit-plots") {
        eval::run_stage("plots", [&] {
          for (const auto& f : eval::emit_plots(dir, eval::report_channels(cfg.report_buses), cfg.clock()))
            std::cout << f << '\n';
        });
      }
    }
    std::cout << "artifacts: " << dir << '\n';
  } catch (const std::exception& e) {
    std::cerr << "fasekit: " << e.what() << '\n';
    return exit_code(e);
  }
  return 0;
}
