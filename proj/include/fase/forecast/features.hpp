#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fase/common/error.hpp"
#include "fase/common/timeslot.hpp"
#include "fase/grid/network.hpp"
#include "fase/measure/stream_io.hpp"

namespace fase::forecast {

using grid::Phase;

/// One household series reported by a smart meter on a given phase.
struct MeterSeries {
  std::string id;
  Phase phase = Phase::A;
  std::vector<double> kw; ///< indexed by slot - first_slot
};

/// Target series of one loaded bus-phase.
struct NodeSeries {
  std::string bus;
  Phase phase = Phase::A;
  std::vector<double> kw;
};

/// Slot-aligned inputs for feature construction; every series starts at `first_slot`.
struct FeatureInputs {
  long first_slot = 0;
  long count = 0;
  std::vector<double> irradiance_wm2;
  std::vector<std::array<double, 3>> branch_current_pu; ///< main-branch |I| per phase
  measure::AvailabilityMask mask;
  std::vector<MeterSeries> meters;
  std::vector<NodeSeries> targets;
  SlotClock clock;
};

inline const std::vector<std::string>& feature_columns() {
  static const std::vector<std::string> cols{"irradiance_wm2", "branch_current_pu", "meter_kw", "meter_count",
                                             "slot_of_day", "day_of_week"};
  return cols;
}

/// Feature rows and targets of one phase.
struct FeatureFrame {
  Phase phase = Phase::A;
  std::vector<long> slots;
  Eigen::MatrixXd features;           ///< slots x feature_columns()
  std::vector<std::string> target_ids; ///< bus ids of the target nodes
  Eigen::MatrixXd targets;            ///< slots x targets, kW

  long size() const { return static_cast<long>(slots.size()); }
};

/// Builds the phase-`phase` frame: only meters and targets on that phase, and
/// only meters marked available in a slot contribute to that slot's aggregate.
/// Unavailable meters count as zero; `meter_count` records how many reported.
inline FeatureFrame build_features(const FeatureInputs& in, Phase phase) {
  const auto n = static_cast<std::size_t>(in.count);
  if (in.count < 1)
    throw DomainError("build_features: empty slot range");
  auto need = [&](std::size_t size, const std::string& what) {
    if (size != n)
      throw DomainError("build_features: " + what + " has " + std::to_string(size) + " slots, expected " +
                        std::to_string(n));
  };
  need(in.irradiance_wm2.size(), "irradiance");
  need(in.branch_current_pu.size(), "branch current");
  need(in.mask.slots.size(), "availability mask");
  for (std::size_t k = 0; k < n; ++k)
    if (in.mask.slots[k] != in.first_slot + static_cast<long>(k))
      throw DomainError("build_features: availability mask is not aligned with the slot range at position " +
                        std::to_string(k));
  std::vector<std::ptrdiff_t> column;
  std::vector<const MeterSeries*> meters;
  for (const auto& m : in.meters) {
    if (m.phase != phase)
      continue;
    need(m.kw.size(), "meter " + m.id);
    std::ptrdiff_t c = -1;
    for (std::size_t j = 0; j < in.mask.meters.size(); ++j)
      if (in.mask.meters[j] == m.id)
        c = static_cast<std::ptrdiff_t>(j);
    if (c < 0)
      throw DomainError("build_features: meter " + m.id + " missing from the availability mask");
    meters.push_back(&m);
    column.push_back(c);
  }

  FeatureFrame f;
  f.phase = phase;
  f.features.resize(in.count, static_cast<Eigen::Index>(feature_columns().size()));
  const auto p = static_cast<std::size_t>(phase);
  for (std::size_t k = 0; k < n; ++k) {
    const long slot = in.first_slot + static_cast<long>(k);
    f.slots.push_back(slot);
    double kw = 0.0;
    int count = 0;
    for (std::size_t j = 0; j < meters.size(); ++j)
      if (in.mask.available[k][static_cast<std::size_t>(column[j])]) {
        kw += meters[j]->kw[k];
        ++count;
      }
    const auto r = static_cast<Eigen::Index>(k);
    f.features(r, 0) = in.irradiance_wm2[k];
    f.features(r, 1) = in.branch_current_pu[k][p];
    f.features(r, 2) = kw;
    f.features(r, 3) = count;
    f.features(r, 4) = slot_of_day(slot);
    f.features(r, 5) = in.clock.day_of_week(slot);
  }
  std::vector<const NodeSeries*> targets;
  for (const auto& t : in.targets)
    if (t.phase == phase) {
      need(t.kw.size(), "target " + t.bus);
      targets.push_back(&t);
      f.target_ids.push_back(t.bus);
    }
  f.targets.resize(in.count, static_cast<Eigen::Index>(targets.size()));
  for (std::size_t j = 0; j < targets.size(); ++j)
    for (std::size_t k = 0; k < n; ++k)
      f.targets(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = targets[j]->kw[k];
  return f;
}

} // namespace fase::forecast
