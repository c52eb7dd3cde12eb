#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "fase/common/csv.hpp"
#include "fase/common/error.hpp"
#include "fase/eval/artifacts.hpp"
#include "fase/eval/ellipse.hpp"
#include "fase/eval/metrics.hpp"

namespace fase::eval {

/// Bus-phases reported when none are configured and they exist in the run.
inline const std::vector<std::string>& default_report_buses() {
  static const std::vector<std::string> b{"11.1", "54.2", "83.3", "93.2"};
  return b;
}

inline std::vector<ChannelKey> report_channels(const std::vector<std::string>& labels) {
  std::vector<ChannelKey> out;
  for (const auto& l : labels)
    out.push_back(ChannelKey::parse(l));
  return out;
}

/// Bundle file names inside `<artifacts>/plots`.
namespace plot_files {
inline constexpr const char* voltage = "voltage_traces.csv";
inline constexpr const char* parameters = "parameter_traces.csv";
inline constexpr const char* ellipses = "error_ellipses.csv";
inline constexpr const char* histograms = "error_histograms.csv";
} // namespace plot_files

inline constexpr double kEllipseLevels[] = {0.5, 0.95};
inline constexpr int kEllipseVertices = 72;
inline constexpr int kHistogramBins = 20;

/// Channels to plot: the requested ones, else the default exemplars present
/// in the estimates, else every estimated channel.
inline std::vector<ChannelKey> select_channels(const VoltageSeries& est, const std::vector<ChannelKey>& requested) {
  std::vector<ChannelKey> out;
  if (!requested.empty()) {
    for (const auto& k : requested) {
      if (!est.count(k))
        throw ConfigError("report bus " + k.label() + " is not in the estimates");
      out.push_back(k);
    }
    return out;
  }
  for (const auto& l : default_report_buses()) {
    const auto k = ChannelKey::parse(l);
    if (est.count(k))
      out.push_back(k);
  }
  if (out.empty())
    for (const auto& [k, v] : est)
      out.push_back(k);
  return out;
}

/// Writes the four plot bundles into `<dir>/plots`:
///   voltage_traces.csv    timestamp,bus_phase,quantity,unit,estimate,truth,error
///   parameter_traces.csv  timestamp,phase,alpha,beta,branch_rate,rate_unit
///   error_ellipses.csv    bus_phase,confidence,shape,vertex,v_err_pu,ang_err_deg
///   error_histograms.csv  bus_phase,quantity,unit,bin,bin_lo,bin_hi,count
/// Ellipse polygons are closed: the last vertex repeats the first.
inline std::vector<std::string> emit_plots(const std::string& dir, const std::vector<ChannelKey>& requested = {},
                                           const SlotClock& clock = SlotClock{}) {
  for (const char* f : {files::estimates, files::traces})
    if (!std::filesystem::is_regular_file(dir + "/" + f))
      throw SchemaError("emit_plots: missing input '" + dir + "/" + f + "'");
  const auto [est, truth] = read_estimates(dir + "/" + files::estimates, clock);
  const auto traces = read_traces(dir + "/" + files::traces, clock);
  const auto channels = select_channels(est, requested);
  const std::string out = dir + "/plots";
  std::filesystem::create_directories(out);
  std::vector<std::string> written;

  struct Errors {
    std::vector<double> v, a;
  };
  std::vector<Errors> errs;
  {
    written.push_back(out + "/" + plot_files::voltage);
    csv::Writer w(written.back());
    w.row("timestamp", "bus_phase", "quantity", "unit", "estimate", "truth", "error");
    for (const auto& k : channels) {
      Errors e;
      const auto& tk = truth.at(k);
      for (const auto& [slot, p] : est.at(k)) {
        const auto& t = tk.at(slot);
        const double ev = p.v_pu - t.v_pu, ea = angle_diff_deg(p.ang_deg, t.ang_deg);
        w.row(clock.timestamp(slot), k.label(), "v_mag", "pu", p.v_pu, t.v_pu, ev);
        w.row(clock.timestamp(slot), k.label(), "v_ang", "deg", p.ang_deg, t.ang_deg, ea);
        e.v.push_back(ev);
        e.a.push_back(ea);
      }
      errs.push_back(std::move(e));
    }
  }
  {
    written.push_back(out + "/" + plot_files::parameters);
    csv::Writer w(written.back());
    w.row("timestamp", "phase", "alpha", "beta", "branch_rate", "rate_unit");
    for (const auto& t : traces)
      w.row(clock.timestamp(t.slot), phase_str(t.phase), t.alpha, t.beta, t.branch_rate, "pu/slot");
  }
  {
    written.push_back(out + "/" + plot_files::ellipses);
    csv::Writer w(written.back());
    w.row("bus_phase", "confidence", "shape", "vertex", "v_err_pu", "ang_err_deg");
    for (std::size_t i = 0; i < channels.size(); ++i) {
      Eigen::MatrixX2d m(static_cast<Eigen::Index>(errs[i].v.size()), 2);
      for (std::size_t r = 0; r < errs[i].v.size(); ++r)
        m.row(static_cast<Eigen::Index>(r)) << errs[i].v[r], errs[i].a[r];
      for (double level : kEllipseLevels) {
        const auto e = error_ellipse(m, level);
        const auto poly = ellipse_polygon(e, kEllipseVertices);
        for (std::size_t v = 0; v < poly.size(); ++v)
          w.row(channels[i].label(), level, std::string(shape_name(e.shape)), static_cast<int>(v), poly[v][0],
                poly[v][1]);
      }
    }
  }
  {
    written.push_back(out + "/" + plot_files::histograms);
    csv::Writer w(written.back());
    w.row("bus_phase", "quantity", "unit", "bin", "bin_lo", "bin_hi", "count");
    auto hist = [&](const ChannelKey& k, const char* q, const char* unit, const std::vector<double>& x) {
      const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
      double lo = *lo_it, hi = *hi_it;
      if (!(hi > lo)) {
        lo -= 0.5e-9;
        hi += 0.5e-9;
      }
      const double width = (hi - lo) / kHistogramBins;
      std::vector<long> count(kHistogramBins, 0);
      for (double v : x)
        ++count[static_cast<std::size_t>(std::clamp(static_cast<int>((v - lo) / width), 0, kHistogramBins - 1))];
      for (int b = 0; b < kHistogramBins; ++b)
        w.row(k.label(), std::string(q), std::string(unit), b, lo + b * width, lo + (b + 1) * width,
              count[static_cast<std::size_t>(b)]);
    };
    for (std::size_t i = 0; i < channels.size(); ++i) {
      hist(channels[i], "v_mag", "pu", errs[i].v);
      hist(channels[i], "v_ang", "deg", errs[i].a);
    }
  }
  return written;
}

} // namespace fase::eval
