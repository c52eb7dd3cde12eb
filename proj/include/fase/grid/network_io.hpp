#pragma once

#include <fstream>
#include <string>

#include "json.hpp"

#include "fase/grid/network.hpp"

namespace fase::grid {

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object() || !obj.contains(key))
    throw SchemaError(ctx + ": missing field '" + key + "'");
  return obj.at(key);
}

inline double number(const nlohmann::json& obj, const char* key, const std::string& ctx) {
  const auto& v = field(obj, key, ctx);
  if (!v.is_number())
    throw SchemaError(ctx + "." + key + ": expected a number");
  return v.get<double>();
}

inline std::string text(const nlohmann::json& obj, const char* key, const std::string& ctx) {
  const auto& v = field(obj, key, ctx);
  if (v.is_string())
    return v.get<std::string>();
  if (v.is_number_integer())
    return std::to_string(v.get<long long>());
  throw SchemaError(ctx + "." + key + ": expected a string");
}

// Accepts a flat row-major array of n*n numbers or an n-by-n nested array.
inline Eigen::MatrixXd matrix(const nlohmann::json& v, int n, const std::string& ctx) {
  Eigen::MatrixXd m(n, n);
  if (!v.is_array())
    throw SchemaError(ctx + ": expected an array");
  if (v.size() == static_cast<std::size_t>(n * n) && (n == 1 || !v[0].is_array())) {
    for (int i = 0; i < n * n; ++i) {
      if (!v[i].is_number())
        throw SchemaError(ctx + "[" + std::to_string(i) + "]: expected a number");
      m(i / n, i % n) = v[i].get<double>();
    }
    return m;
  }
  if (v.size() != static_cast<std::size_t>(n))
    throw SchemaError(ctx + ": expected " + std::to_string(n * n) + " entries for " +
                      std::to_string(n) + " phases");
  for (int i = 0; i < n; ++i) {
    if (!v[i].is_array() || v[i].size() != static_cast<std::size_t>(n))
      throw SchemaError(ctx + "[" + std::to_string(i) + "]: expected " + std::to_string(n) + " entries");
    for (int j = 0; j < n; ++j) {
      if (!v[i][j].is_number())
        throw SchemaError(ctx + "[" + std::to_string(i) + "][" + std::to_string(j) + "]: expected a number");
      m(i, j) = v[i][j].get<double>();
    }
  }
  return m;
}

} // namespace detail

inline NetworkModel network_from_json(const nlohmann::json& j) {
  using namespace detail;
  std::vector<Bus> buses;
  const auto& jb = field(j, "buses", "network");
  if (!jb.is_array())
    throw SchemaError("network.buses: expected an array");
  for (std::size_t i = 0; i < jb.size(); ++i) {
    const std::string ctx = "buses[" + std::to_string(i) + "]";
    Bus b;
    b.id = text(jb[i], "id", ctx);
    try {
      b.phases = PhaseSet::parse(text(jb[i], "phases", ctx));
    } catch (const SchemaError& e) {
      throw SchemaError(ctx + ".phases: " + e.what());
    }
    b.kv_base = number(jb[i], "kv_base", ctx);
    buses.push_back(std::move(b));
  }

  std::vector<Branch> branches;
  const auto& jr = field(j, "branches", "network");
  if (!jr.is_array())
    throw SchemaError("network.branches: expected an array");
  for (std::size_t i = 0; i < jr.size(); ++i) {
    const std::string ctx = "branches[" + std::to_string(i) + "]";
    Branch br;
    br.from = text(jr[i], "from", ctx);
    br.to = text(jr[i], "to", ctx);
    PhaseSet ps;
    try {
      ps = PhaseSet::parse(text(jr[i], "phases", ctx));
    } catch (const SchemaError& e) {
      throw SchemaError(ctx + ".phases: " + e.what());
    }
    br.phases = ps.list();
    const int n = ps.size();
    const Eigen::MatrixXd r = matrix(field(jr[i], "r_matrix", ctx), n, ctx + ".r_matrix");
    const Eigen::MatrixXd x = matrix(field(jr[i], "x_matrix", ctx), n, ctx + ".x_matrix");
    br.z_ohm = r.cast<cplx>() + cplx{0.0, 1.0} * x.cast<cplx>();
    if (jr[i].contains("length_scaled"))
      br.length_scaled = jr[i]["length_scaled"].get<bool>();
    branches.push_back(std::move(br));
  }

  std::vector<LoadSpec> loads;
  if (j.contains("loads")) {
    const auto& jl = j.at("loads");
    if (!jl.is_array())
      throw SchemaError("network.loads: expected an array");
    for (std::size_t i = 0; i < jl.size(); ++i) {
      const std::string ctx = "loads[" + std::to_string(i) + "]";
      LoadSpec l;
      l.bus = text(jl[i], "bus", ctx);
      l.phase = parse_phase(text(jl[i], "phase", ctx));
      l.p_kw = number(jl[i], "p_kw", ctx);
      l.pf = number(jl[i], "pf", ctx);
      loads.push_back(std::move(l));
    }
  }

  if (!j.contains("slack"))
    throw TopologyError("network: no slack bus (missing 'slack')");
  const auto& js = j.at("slack");
  SlackSource slack{text(js, "bus", "slack"), number(js, "v_pu", "slack"), number(js, "ang_deg", "slack")};
  const double base_mva = j.contains("base_mva") ? j.at("base_mva").get<double>() : 1.0;
  const std::string name = j.contains("name") ? j.at("name").get<std::string>() : std::string{};
  return NetworkModel(std::move(buses), std::move(branches), std::move(loads), std::move(slack),
                      base_mva, name);
}

/// Reads and validates a feeder description (JSON network schema).
inline NetworkModel load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw SchemaError("cannot open network file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
  try {
    return network_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  } catch (const TopologyError& e) {
    throw TopologyError(path + ": " + e.what());
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

inline nlohmann::json network_to_json(const NetworkModel& net) {
  nlohmann::json j;
  if (!net.name().empty())
    j["name"] = net.name();
  j["base_mva"] = net.base_mva();
  for (const auto& b : net.buses())
    j["buses"].push_back({{"id", b.id}, {"phases", b.phases.str()}, {"kv_base", b.kv_base}});
  for (const auto& br : net.branches()) {
    std::string ph;
    for (Phase p : br.phases)
      ph += phase_char(p);
    std::vector<double> r, x;
    for (int i = 0; i < br.z_ohm.rows(); ++i)
      for (int k = 0; k < br.z_ohm.cols(); ++k) {
        r.push_back(br.z_ohm(i, k).real());
        x.push_back(br.z_ohm(i, k).imag());
      }
    j["branches"].push_back({{"from", br.from}, {"to", br.to}, {"phases", ph}, {"r_matrix", r}, {"x_matrix", x}});
  }
  j["loads"] = nlohmann::json::array();
  for (const auto& l : net.loads())
    j["loads"].push_back({{"bus", l.bus}, {"phase", std::string(1, phase_char(l.phase))}, {"p_kw", l.p_kw}, {"pf", l.pf}});
  j["slack"] = {{"bus", net.slack().bus}, {"v_pu", net.slack().v_pu}, {"ang_deg", net.slack().ang_deg}};
  return j;
}

} // namespace fase::grid
