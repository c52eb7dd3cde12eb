#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fase/common/error.hpp"
#include "fase/common/rng.hpp"
#include "fase/common/timeslot.hpp"
#include "fase/der/bess.hpp"
#include "fase/der/ev.hpp"
#include "fase/der/household.hpp"
#include "fase/der/hvac.hpp"
#include "fase/der/profiles.hpp"
#include "fase/der/pv.hpp"
#include "fase/grid/network.hpp"

namespace fase::der {

enum class Category { household = 0, household_pv = 1, household_pv_bess = 2, commercial = 3 };
inline constexpr std::array<Category, 4> kCategories{Category::household, Category::household_pv,
                                                      Category::household_pv_bess, Category::commercial};

inline const char* category_name(Category c) {
  switch (c) {
  case Category::household: return "household";
  case Category::household_pv: return "household_pv";
  case Category::household_pv_bess: return "household_pv_bess";
  case Category::commercial: return "commercial";
  }
  return "?";
}

/// Unit mix of one aggregated node: category shares in percent, and EV/HVAC
/// counts per 100 units.
struct ScenarioComposition {
  int year = 2023;
  std::array<double, 4> shares{79, 5, 1, 15};
  int ev_count = 4;
  int hvac_count = 5;

  void validate() const {
    double sum = 0.0;
    for (double s : shares) {
      if (!(s >= 0.0))
        throw ConfigError("scenario: category shares must be non-negative");
      sum += s;
    }
    if (std::abs(sum - 100.0) > 1e-9)
      throw ConfigError("scenario: category shares sum to " + std::to_string(sum) + ", expected 100");
    if (ev_count < 0 || hvac_count < 0)
      throw ConfigError("scenario: EV and HVAC counts must be non-negative");
  }
};

/// The three published horizons.
inline ScenarioComposition scenario_for_year(int year) {
  switch (year) {
  case 2023: return {2023, {79, 5, 1, 15}, 4, 5};
  case 2035: return {2035, {65, 18, 2, 15}, 38, 8};
  case 2050: return {2050, {44, 37, 4, 15}, 80, 40};
  default: throw ConfigError("scenario: no composition for year " + std::to_string(year) + " (2023, 2035, 2050)");
  }
}

/// Integer apportionment of `total` proportional to `weights` (largest remainder, ties to the lower index).
inline std::vector<int> largest_remainder(std::span<const double> weights, int total) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> out(weights.size(), 0);
  if (total <= 0 || !(sum > 0.0))
    return out;
  std::vector<std::pair<double, std::size_t>> rem;
  int used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = weights[i] / sum * total;
    out[i] = static_cast<int>(std::floor(exact + 1e-12));
    used += out[i];
    rem.emplace_back(exact - out[i], i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; k < total - used; ++k)
    ++out[rem[static_cast<std::size_t>(k) % rem.size()].second];
  return out;
}

struct LibraryConfig {
  std::uint64_t seed = 1;
  int days = 365;
  int calendar_year = 2023;
  int size_per_category = 300;
  int ev_size = 300;
  int hvac_size = 300;
  std::vector<double> pv_kwp{3.0, 4.0, 5.0};
  std::vector<std::pair<double, double>> bess_options{{5.0, 2.5}, {10.0, 3.68}, {13.5, 5.0}}; ///< (kWh, kW)
  HvacParams hvac;
  EvBehaviorParams ev;
  WeatherParams weather;
  TariffParams tariff;
};

/// Pool of year-long unit profiles. Entries are generated on first use from
/// per-entry seeded streams, so the pool behaves as if fully materialised.
class ProfileLibrary {
public:
  explicit ProfileLibrary(LibraryConfig cfg, std::optional<Weather> weather = std::nullopt,
                          std::optional<Series> price = std::nullopt)
      : cfg_(std::move(cfg)), clock_(cfg_.calendar_year) {
    if (cfg_.days < 1)
      throw ConfigError("profile library: days must be at least 1");
    slots_ = static_cast<long>(cfg_.days) * kSlotsPerDay;
    weather_ = weather ? std::move(*weather) : synthetic_weather(cfg_.seed, cfg_.days, cfg_.weather);
    price_ = price ? std::move(*price) : time_of_use_price(slots_, clock_, cfg_.tariff);
    if (static_cast<long>(weather_.size()) < slots_ || static_cast<long>(price_.size()) < slots_)
      throw SchemaError("profile library: weather or price series shorter than " + std::to_string(cfg_.days) + " days");
    weather_.ambient_c.resize(static_cast<std::size_t>(slots_));
    weather_.irradiance_wm2.resize(static_cast<std::size_t>(slots_));
    price_.resize(static_cast<std::size_t>(slots_));
  }

  const LibraryConfig& config() const { return cfg_; }
  long slots() const { return slots_; }
  const Weather& weather() const { return weather_; }
  const Series& price() const { return price_; }
  const SlotClock& clock() const { return clock_; }

  int size(Category) const { return cfg_.size_per_category; }
  int ev_size() const { return cfg_.ev_size; }
  int hvac_size() const { return cfg_.hvac_size; }

  /// Demand of the unit before EV/HVAC: base, minus PV, plus battery.
  const Series& unit(Category c, int i) {
    check_index(i, size(c), category_name(c));
    const auto key = std::make_pair(static_cast<int>(c), i);
    if (auto it = units_.find(key); it != units_.end())
      return it->second;
    const auto entity = static_cast<std::uint64_t>(i);
    Series base = c == Category::commercial ? commercial_base_profile(cfg_.seed, entity, slots_, clock_)
                                            : household_base_profile(cfg_.seed, entity + 100000u * static_cast<int>(c), slots_, clock_);
    if (c == Category::household_pv || c == Category::household_pv_bess) {
      auto gen = entity_rng(cfg_.seed, entity, c == Category::household_pv ? "pv-size" : "pv-bess-size");
      const double kwp = pick(gen, cfg_.pv_kwp);
      const Series& shape = pv_shape();
      for (std::size_t t = 0; t < base.size(); ++t)
        base[t] -= kwp * shape[t];
      if (c == Category::household_pv_bess) {
        const auto& opt = pick(gen, cfg_.bess_options);
        const Series& b = bess(opt.first, opt.second);
        for (std::size_t t = 0; t < base.size(); ++t)
          base[t] += b[t];
      }
    }
    return units_.emplace(key, std::move(base)).first->second;
  }

  const Series& ev(int i) {
    check_index(i, ev_size(), "ev");
    if (auto it = ev_.find(i); it != ev_.end())
      return it->second;
    return ev_.emplace(i, simulate_ev_year(cfg_.seed, static_cast<std::uint64_t>(i), slots_, default_ev_brands(), cfg_.ev))
        .first->second;
  }

  const Series& hvac(int i) {
    check_index(i, hvac_size(), "hvac");
    if (auto it = hvac_.find(i); it != hvac_.end())
      return it->second;
    auto gen = entity_rng(cfg_.seed, static_cast<std::uint64_t>(i), "hvac-params");
    HvacParams p = cfg_.hvac;
    const double size = 0.8 + 0.4 * NormalSampler::uniform01(gen);
    p.r1 /= size;
    p.q_w *= size;
    p.band_low += NormalSampler::uniform01(gen) - 0.5;
    p.band_high = p.band_low + 2.0;
    auto r = simulate_hvac(p, weather_.ambient_c, HvacState{20.0, 20.0});
    return hvac_.emplace(i, std::move(r.demand_kw)).first->second;
  }

  /// Normalized PV output per slot (fraction of module rating).
  const Series& pv_shape() {
    if (pv_shape_.empty())
      pv_shape_ = simulate_pv(PvModuleParams{}, weather_.irradiance_wm2, weather_.ambient_c).normalized;
    return pv_shape_;
  }

  const Series& bess(double e_max_kwh, double b_max_kw) {
    const auto key = std::make_pair(e_max_kwh, b_max_kw);
    if (auto it = bess_.find(key); it != bess_.end())
      return it->second;
    return bess_.emplace(key, bess_year(price_, e_max_kwh, b_max_kw)).first->second;
  }

private:
  static void check_index(int i, int n, const char* what) {
    if (n <= 0)
      throw ConfigError(std::string("profile library: no ") + what + " profiles");
    if (i < 0 || i >= n)
      throw DomainError(std::string("profile library: ") + what + " index " + std::to_string(i) + " out of range");
  }

  template <class T>
  static const T& pick(std::mt19937_64& gen, const std::vector<T>& v) {
    if (v.empty())
      throw ConfigError("profile library: empty option list");
    const auto k = static_cast<std::size_t>(NormalSampler::uniform01(gen) * static_cast<double>(v.size()));
    return v[std::min(k, v.size() - 1)];
  }

  LibraryConfig cfg_;
  SlotClock clock_;
  long slots_ = 0;
  Weather weather_;
  Series price_;
  Series pv_shape_;
  std::map<std::pair<int, int>, Series> units_;
  std::map<int, Series> ev_;
  std::map<int, Series> hvac_;
  std::map<std::pair<double, double>, Series> bess_;
};

struct ScenarioConfig {
  ScenarioComposition composition;
  int units_per_node = 100;
  double export_cap_kw = 3.68;
  double sigma_rel = 0.03;
  std::uint64_t seed = 7;
  int meters_per_node = 10; ///< household series kept per node as smart-meter readings
};

struct NodeDemand {
  int node = -1;
  std::array<int, 4> counts{}; ///< units per category
  int ev = 0;
  int hvac = 0;
  double scale = 1.0;          ///< applied to the aggregate to match the snapshot mean
  std::vector<double> p_kw;
  std::vector<double> q_kvar;
  std::vector<double> normalized; ///< p_kw / max(p_kw)
  std::vector<std::vector<double>> meter_kw; ///< unscaled household series of the metered units
};

struct ScenarioDemand {
  long slots = 0;
  std::vector<NodeDemand> nodes; ///< loaded nodes in node order

  /// Per-node complex demand in pu for one slot (zero at unloaded nodes).
  std::vector<grid::cplx> demand_pu(const grid::NetworkModel& net, long slot) const {
    std::vector<grid::cplx> s(static_cast<std::size_t>(net.node_count()), grid::cplx{});
    const double base = net.phase_power_base_kva();
    for (const auto& n : nodes)
      s[static_cast<std::size_t>(n.node)] = {n.p_kw[static_cast<std::size_t>(slot)] / base,
                                             n.q_kvar[static_cast<std::size_t>(slot)] / base};
    return s;
  }
};

/// Aggregated MV demand for every loaded bus-phase of `net`.
///
/// Each node aggregates `units_per_node` units split by the composition shares;
/// EVs and HVAC units attach to randomly chosen units. The aggregate receives
/// the relative error, is scaled so its mean equals the node's snapshot load,
/// and carries reactive power at the node's snapshot Q/P ratio.
inline ScenarioDemand build_scenario(const grid::NetworkModel& net, const ScenarioConfig& cfg, ProfileLibrary& lib) {
  cfg.composition.validate();
  if (cfg.units_per_node < 1)
    throw ConfigError("scenario: units_per_node must be at least 1");
  if (cfg.meters_per_node < 0 || cfg.meters_per_node > cfg.units_per_node)
    throw ConfigError("scenario: meters_per_node must lie in [0, units_per_node]");
  for (Category c : kCategories)
    if (cfg.composition.shares[static_cast<int>(c)] > 0.0 && lib.size(c) <= 0)
      throw ConfigError(std::string("scenario: library has no ") + category_name(c) + " profiles");
  if (cfg.composition.ev_count > 0 && lib.ev_size() <= 0)
    throw ConfigError("scenario: library has no EV profiles");
  if (cfg.composition.hvac_count > 0 && lib.hvac_size() <= 0)
    throw ConfigError("scenario: library has no HVAC profiles");

  const int units = cfg.units_per_node;
  const auto counts = largest_remainder(cfg.composition.shares, units);
  const int n_ev = std::min(units, static_cast<int>(std::lround(cfg.composition.ev_count * units / 100.0)));
  const int n_hvac = std::min(units, static_cast<int>(std::lround(cfg.composition.hvac_count * units / 100.0)));
  const auto snapshot = net.snapshot_demand_pu();
  const double base = net.phase_power_base_kva();

  ScenarioDemand out;
  out.slots = lib.slots();
  for (int node : net.loaded_nodes()) {
    const double p_snap = snapshot[static_cast<std::size_t>(node)].real() * base;
    if (!(p_snap > 0.0))
      continue;
    auto gen = entity_rng(cfg.seed, static_cast<std::uint64_t>(node), "node-units");
    std::vector<Category> cat;
    for (Category c : kCategories)
      cat.insert(cat.end(), static_cast<std::size_t>(counts[static_cast<int>(c)]), c);
    std::vector<int> order(static_cast<std::size_t>(units));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), gen);
    std::vector<char> has_ev(static_cast<std::size_t>(units), 0), has_hvac(static_cast<std::size_t>(units), 0);
    for (int k = 0; k < n_ev; ++k)
      has_ev[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = 1;
    std::shuffle(order.begin(), order.end(), gen);
    for (int k = 0; k < n_hvac; ++k)
      has_hvac[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = 1;

    auto draw = [&](int n) { return static_cast<int>(std::min<double>(n - 1, NormalSampler::uniform01(gen) * n)); };
    std::vector<std::vector<double>> households;
    households.reserve(static_cast<std::size_t>(units));
    for (int u = 0; u < units; ++u) {
      const Category c = cat[static_cast<std::size_t>(u)];
      HouseholdParts parts;
      parts.base_kw = lib.unit(c, draw(lib.size(c)));
      if (has_ev[static_cast<std::size_t>(u)])
        parts.ev_kw = lib.ev(draw(lib.ev_size()));
      if (has_hvac[static_cast<std::size_t>(u)])
        parts.hvac_kw = lib.hvac(draw(lib.hvac_size()));
      parts.export_cap_kw = cfg.export_cap_kw;
      households.push_back(compose_household(parts));
    }
    NodeDemand nd;
    nd.meter_kw.assign(households.begin(), households.begin() + cfg.meters_per_node);
    auto agg = inject_aggregation_error(aggregate_mv(households), cfg.sigma_rel,
                                        splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(node) + 1)));

    nd.node = node;
    std::copy(counts.begin(), counts.end(), nd.counts.begin());
    nd.ev = n_ev;
    nd.hvac = n_hvac;
    const double mean = std::accumulate(agg.p_kw.begin(), agg.p_kw.end(), 0.0) / static_cast<double>(agg.p_kw.size());
    if (!(mean > 0.0))
      throw DomainError("scenario: aggregate at " + net.node_label(node) + " has non-positive mean demand");
    nd.scale = p_snap / mean;
    const double tan_phi = snapshot[static_cast<std::size_t>(node)].imag() / snapshot[static_cast<std::size_t>(node)].real();
    nd.p_kw.resize(agg.p_kw.size());
    nd.q_kvar.resize(agg.p_kw.size());
    for (std::size_t t = 0; t < agg.p_kw.size(); ++t) {
      nd.p_kw[t] = agg.p_kw[t] * nd.scale;
      nd.q_kvar[t] = nd.p_kw[t] * tan_phi;
    }
    const double peak = *std::max_element(nd.p_kw.begin(), nd.p_kw.end());
    nd.normalized.resize(nd.p_kw.size());
    for (std::size_t t = 0; t < nd.p_kw.size(); ++t)
      nd.normalized[t] = nd.p_kw[t] / peak;
    out.nodes.push_back(std::move(nd));
  }
  return out;
}

} // namespace fase::der
