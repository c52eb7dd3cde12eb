#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "fase/common/csv.hpp"
#include "fase/common/error.hpp"
#include "fase/common/timeslot.hpp"
#include "fase/forecast/baseline.hpp"
#include "fase/forecast/features.hpp"
#include "fase/forecast/supervised.hpp"

namespace fase::forecast {

inline constexpr const char* kManifestFormat = "fase-training/1";

namespace detail {

inline std::string typed(const std::string& name) {
  static const std::set<std::string> ints{"meter_count", "slot_of_day", "day_of_week"};
  return name + (ints.count(name) ? ":i64" : ":f64");
}

inline std::string target_column(const std::string& bus, Phase p) { return bus + "." + grid::phase_char(p); }

inline nlohmann::json scaler_json(const MinMaxScaler& s) {
  return {{"min", std::vector<double>(s.min.data(), s.min.data() + s.min.size())},
          {"max", std::vector<double>(s.max.data(), s.max.data() + s.max.size())}};
}

inline MinMaxScaler scaler_from(const nlohmann::json& j, Eigen::Index cols, const std::string& what) {
  const auto lo = j.at("min").get<std::vector<double>>();
  const auto hi = j.at("max").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(lo.size()) != cols || static_cast<Eigen::Index>(hi.size()) != cols)
    throw SchemaError("manifest: " + what + " scaling has the wrong number of columns");
  return {Eigen::Map<const Eigen::VectorXd>(lo.data(), cols), Eigen::Map<const Eigen::VectorXd>(hi.data(), cols)};
}

} // namespace detail

/// Writes features.csv, targets.csv and manifest.json into `dir`. Values are
/// unscaled and written at full precision; the manifest carries the scaling.
inline void export_training_data(const std::string& dir, const FeatureFrame& f, const WindowedDataset& d,
                                 const SlotClock& clock = SlotClock{}) {
  if (f.size() != d.rows)
    throw DomainError("export_training_data: dataset has " + std::to_string(d.rows) + " rows, frame " +
                      std::to_string(f.size()));
  std::filesystem::create_directories(dir);
  const auto& cols = feature_columns();
  {
    std::ofstream out(dir + "/features.csv");
    if (!out)
      throw Error("cannot write '" + dir + "/features.csv'");
    out << "timestamp:str";
    for (const auto& c : cols)
      out << ',' << detail::typed(c);
    out << '\n';
    for (long r = 0; r < f.size(); ++r) {
      out << clock.timestamp(f.slots[static_cast<std::size_t>(r)]);
      for (Eigen::Index c = 0; c < f.features.cols(); ++c)
        out << ',' << csv::fmt(f.features(r, c));
      out << '\n';
    }
  }
  std::vector<std::string> target_cols;
  for (const auto& b : f.target_ids)
    target_cols.push_back(detail::target_column(b, f.phase));
  {
    std::ofstream out(dir + "/targets.csv");
    if (!out)
      throw Error("cannot write '" + dir + "/targets.csv'");
    out << "timestamp:str";
    for (const auto& c : target_cols)
      out << ',' << c << ":f64";
    out << '\n';
    for (long r = 0; r < f.size(); ++r) {
      out << clock.timestamp(f.slots[static_cast<std::size_t>(r)]);
      for (Eigen::Index c = 0; c < f.targets.cols(); ++c)
        out << ',' << csv::fmt(f.targets(r, c));
      out << '\n';
    }
  }
  nlohmann::ordered_json m;
  m["format"] = kManifestFormat;
  m["phase"] = std::string(1, grid::phase_char(f.phase));
  m["window"] = d.window;
  m["rows"] = d.rows;
  m["windows"] = d.count();
  m["first_timestamp"] = clock.timestamp(f.slots.front());
  m["last_timestamp"] = clock.timestamp(f.slots.back());
  m["feature_columns"] = cols;
  m["target_columns"] = target_cols;
  m["nodes"] = f.target_ids;
  m["splits"] = {{"train", {0, d.splits.train_end}},
                 {"validation", {d.splits.train_end, d.splits.validation_end}},
                 {"test", {d.splits.validation_end, d.count()}}};
  m["scaling"] = {{"method", "min-max"},
                  {"fitted_on_rows", d.training_rows()},
                  {"features", detail::scaler_json(d.feature_scale)},
                  {"targets", detail::scaler_json(d.target_scale)}};
  std::ofstream out(dir + "/manifest.json");
  if (!out)
    throw Error("cannot write '" + dir + "/manifest.json'");
  out << m.dump(2) << '\n';
}

struct TrainingData {
  FeatureFrame frame;
  WindowedDataset dataset;
};

/// Reads a directory written by export_training_data and checks it against its manifest.
inline TrainingData import_training_data(const std::string& dir, const SlotClock& clock = SlotClock{}) {
  const std::string manifest_path = dir + "/manifest.json";
  std::ifstream in(manifest_path);
  if (!in)
    throw SchemaError("missing manifest '" + manifest_path + "'");
  nlohmann::json m;
  try {
    in >> m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(manifest_path + ": " + e.what());
  }
  TrainingData td;
  try {
    if (m.at("format").get<std::string>() != kManifestFormat)
      throw SchemaError(manifest_path + ": unsupported format '" + m.at("format").get<std::string>() + "'");
    td.frame.phase = grid::parse_phase(m.at("phase").get<std::string>());
    td.frame.target_ids = m.at("nodes").get<std::vector<std::string>>();
    td.dataset.window = m.at("window").get<long>();
    td.dataset.rows = m.at("rows").get<long>();
    const auto cols = m.at("feature_columns").get<std::vector<std::string>>();
    if (cols != feature_columns())
      throw SchemaError(manifest_path + ": feature columns differ from this version's schema");

    const auto ft = csv::read(dir + "/features.csv");
    std::vector<std::string> fh{"timestamp:str"};
    for (const auto& c : cols)
      fh.push_back(detail::typed(c));
    csv::require_header(ft, fh);
    const auto tt = csv::read(dir + "/targets.csv");
    std::vector<std::string> th{"timestamp:str"};
    for (const auto& c : m.at("target_columns").get<std::vector<std::string>>())
      th.push_back(c + ":f64");
    csv::require_header(tt, th);
    if (static_cast<long>(ft.rows.size()) != td.dataset.rows || static_cast<long>(tt.rows.size()) != td.dataset.rows)
      throw SchemaError(manifest_path + ": manifest declares " + std::to_string(td.dataset.rows) +
                        " slots, features.csv has " + std::to_string(ft.rows.size()) + ", targets.csv " +
                        std::to_string(tt.rows.size()));

    const auto n = static_cast<Eigen::Index>(td.dataset.rows);
    td.frame.features.resize(n, static_cast<Eigen::Index>(cols.size()));
    td.frame.targets.resize(n, static_cast<Eigen::Index>(th.size() - 1));
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto& fr = ft.rows[static_cast<std::size_t>(r)];
      if (tt.rows[static_cast<std::size_t>(r)][0] != fr[0])
        throw SchemaError(dir + ": features.csv and targets.csv disagree at row " + std::to_string(r + 2));
      td.frame.slots.push_back(clock.slot(fr[0]));
      for (Eigen::Index c = 0; c < td.frame.features.cols(); ++c)
        td.frame.features(r, c) = ft.number(static_cast<std::size_t>(r), static_cast<std::size_t>(c + 1));
      for (Eigen::Index c = 0; c < td.frame.targets.cols(); ++c)
        td.frame.targets(r, c) = tt.number(static_cast<std::size_t>(r), static_cast<std::size_t>(c + 1));
    }
    const auto& sp = m.at("splits");
    td.dataset.splits.count = td.dataset.count();
    td.dataset.splits.train_end = sp.at("train").at(1).get<long>();
    td.dataset.splits.validation_end = sp.at("validation").at(1).get<long>();
    if (sp.at("test").at(1).get<long>() != td.dataset.count() || m.at("windows").get<long>() != td.dataset.count())
      throw SchemaError(manifest_path + ": window count does not equal rows - window");
    td.dataset.feature_scale = detail::scaler_from(m.at("scaling").at("features"), td.frame.features.cols(), "feature");
    td.dataset.target_scale = detail::scaler_from(m.at("scaling").at("targets"), td.frame.targets.cols(), "target");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(manifest_path + ": " + e.what());
  }
  return td;
}

/// Forecast file `timestamp,node,phase,p_kw_pred,std_kw`, rows ordered by slot then node.
inline void write_forecasts(const std::string& path, const ForecastSeries& f, const SlotClock& clock = SlotClock{}) {
  csv::Writer w(path);
  w.row("timestamp", "node", "phase", "p_kw_pred", "std_kw");
  for (long r = 0; r < f.size(); ++r)
    for (std::size_t j = 0; j < f.buses.size(); ++j)
      w.row(clock.timestamp(f.slots[static_cast<std::size_t>(r)]), f.buses[j], std::string(1, grid::phase_char(f.phases[j])),
            f.p_kw(r, static_cast<Eigen::Index>(j)), f.std_kw(r, static_cast<Eigen::Index>(j)));
}

/// Reads a forecast file. Every (slot, node) pair must appear exactly once and every std must be positive.
inline ForecastSeries import_forecasts(const std::string& path, const SlotClock& clock = SlotClock{}) {
  const auto t = csv::read(path);
  csv::require_header(t, {"timestamp", "node", "phase", "p_kw_pred", "std_kw"});
  std::map<long, std::size_t> slot_pos;
  std::map<std::pair<std::string, Phase>, std::size_t> node_pos;
  ForecastSeries f;
  for (const auto& row : t.rows) {
    slot_pos.emplace(clock.slot(row[0]), 0);
    const auto key = std::make_pair(row[1], grid::parse_phase(row[2]));
    if (node_pos.emplace(key, f.buses.size()).second) {
      f.buses.push_back(key.first);
      f.phases.push_back(key.second);
    }
  }
  for (auto& [slot, pos] : slot_pos) {
    pos = f.slots.size();
    f.slots.push_back(slot);
  }
  const auto rows = static_cast<Eigen::Index>(f.slots.size());
  const auto cols = static_cast<Eigen::Index>(f.buses.size());
  f.p_kw = Eigen::MatrixXd::Constant(rows, cols, std::nan(""));
  f.std_kw = Eigen::MatrixXd::Constant(rows, cols, std::nan(""));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto i = static_cast<Eigen::Index>(slot_pos.at(clock.slot(row[0])));
    const auto j = static_cast<Eigen::Index>(node_pos.at({row[1], grid::parse_phase(row[2])}));
    if (!std::isnan(f.p_kw(i, j)))
      throw SchemaError(path + " line " + std::to_string(r + 2) + ": duplicate forecast for " + row[1] + "." + row[2]);
    f.p_kw(i, j) = t.number(r, 3);
    f.std_kw(i, j) = t.number(r, 4);
    if (!(f.std_kw(i, j) > 0.0))
      throw SchemaError(path + " line " + std::to_string(r + 2) + ": std_kw must be positive");
  }
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      if (std::isnan(f.p_kw(i, j)))
        throw SchemaError(path + ": no forecast for " + f.buses[static_cast<std::size_t>(j)] + "." +
                          grid::phase_char(f.phases[static_cast<std::size_t>(j)]) + " at " +
                          clock.timestamp(f.slots[static_cast<std::size_t>(i)]));
  return f;
}

} // namespace fase::forecast
