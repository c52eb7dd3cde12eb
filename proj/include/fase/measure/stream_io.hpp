#pragma once

#include <map>
#include <string>
#include <vector>

#include "fase/common/csv.hpp"
#include "fase/common/timeslot.hpp"
#include "fase/measure/measurement.hpp"
#include "fase/measure/sampling.hpp"

namespace fase::measure {

/// Rows `timestamp,kind,bus,phase,value,sigma`; branch locations are written "from->to".
inline void write_measurement_stream(const std::string& path, const std::vector<MeasurementSet>& sets,
                                     const SlotClock& clock = SlotClock{}) {
  csv::Writer w(path);
  w.row("timestamp", "kind", "bus", "phase", "value", "sigma");
  for (const auto& set : sets) {
    const std::string ts = clock.timestamp(set.slot);
    for (const auto& m : set.entries)
      w.row(ts, kind_name(m.spec.kind), m.spec.location.label(), std::string(1, grid::phase_char(m.spec.location.phase)),
            m.value, m.spec.sigma);
  }
}

/// Groups rows by timestamp in file order. Pseudo-injection kinds are tagged as pseudo.
inline std::vector<MeasurementSet> read_measurement_stream(const std::string& path,
                                                           const SlotClock& clock = SlotClock{}) {
  const auto t = csv::read(path);
  csv::require_header(t, {"timestamp", "kind", "bus", "phase", "value", "sigma"});
  std::vector<MeasurementSet> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const long slot = clock.slot(row[0]);
    if (out.empty() || out.back().slot != slot) {
      if (!out.empty() && slot < out.back().slot)
        throw SchemaError(path + " line " + std::to_string(r + 2) + ": timestamps out of order");
      out.push_back({slot, {}});
    }
    Measurement m;
    m.spec.kind = parse_kind(row[1]);
    m.spec.location = Location::parse(row[2], grid::parse_phase(row[3]));
    m.value = t.number(r, 4);
    m.spec.sigma = t.number(r, 5);
    if (!(m.spec.sigma > 0.0))
      throw SchemaError(path + " line " + std::to_string(r + 2) + ": sigma must be positive");
    m.variance = m.spec.sigma * m.spec.sigma;
    m.origin = m.spec.kind == Kind::pseudo_injection_p || m.spec.kind == Kind::pseudo_injection_q ? Origin::pseudo
                                                                                                   : Origin::real_time;
    out.back().entries.push_back(m);
  }
  return out;
}

/// Channel list with columns `kind,bus,phase`.
inline std::vector<Channel> read_channel_profile(const std::string& path) {
  const auto t = csv::read(path);
  csv::require_header(t, {"kind", "bus", "phase"});
  std::vector<Channel> out;
  for (const auto& row : t.rows)
    out.push_back({parse_kind(row[0]), Location::parse(row[1], grid::parse_phase(row[2]))});
  return out;
}

inline void write_channel_profile(const std::string& path, const std::vector<Channel>& channels) {
  csv::Writer w(path);
  w.row("kind", "bus", "phase");
  for (const auto& c : channels)
    w.row(kind_name(c.kind), c.location.label(), std::string(1, grid::phase_char(c.location.phase)));
}

/// Availability mask: one row per meter per slot, `available` 0 or 1.
struct AvailabilityMask {
  std::vector<long> slots;
  std::vector<std::string> meters;
  std::vector<std::vector<char>> available; ///< [slot][meter]
};

inline AvailabilityMask availability_mask(const std::vector<std::string>& meters, const AvailabilityModel& m,
                                          long first, long count) {
  m.validate();
  AvailabilityMask out;
  out.meters = meters;
  for (long k = first; k < first + count; ++k) {
    out.slots.push_back(k);
    std::vector<char> row(meters.size());
    for (std::size_t j = 0; j < meters.size(); ++j)
      row[j] = meter_available(m, meters[j], k) ? 1 : 0;
    out.available.push_back(std::move(row));
  }
  return out;
}

inline void write_availability_mask(const std::string& path, const AvailabilityMask& mask,
                                    const SlotClock& clock = SlotClock{}) {
  csv::Writer w(path);
  w.row("timestamp", "meter_id", "available");
  for (std::size_t k = 0; k < mask.slots.size(); ++k) {
    const std::string ts = clock.timestamp(mask.slots[k]);
    for (std::size_t j = 0; j < mask.meters.size(); ++j)
      w.row(ts, mask.meters[j], static_cast<int>(mask.available[k][j]));
  }
}

inline AvailabilityMask read_availability_mask(const std::string& path, const SlotClock& clock = SlotClock{}) {
  const auto t = csv::read(path);
  csv::require_header(t, {"timestamp", "meter_id", "available"});
  AvailabilityMask out;
  std::map<std::string, std::size_t> meter_pos;
  std::map<long, std::size_t> slot_pos;
  for (const auto& row : t.rows) {
    if (meter_pos.emplace(row[1], out.meters.size()).second)
      out.meters.push_back(row[1]);
    const long k = clock.slot(row[0]);
    if (slot_pos.emplace(k, out.slots.size()).second)
      out.slots.push_back(k);
  }
  out.available.assign(out.slots.size(), std::vector<char>(out.meters.size(), 2));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row[2] != "0" && row[2] != "1")
      throw SchemaError(path + " line " + std::to_string(r + 2) + ": available must be 0 or 1");
    out.available[slot_pos[clock.slot(row[0])]][meter_pos[row[1]]] = row[2] == "1" ? 1 : 0;
  }
  for (std::size_t k = 0; k < out.slots.size(); ++k)
    for (std::size_t j = 0; j < out.meters.size(); ++j)
      if (out.available[k][j] == 2)
        throw SchemaError(path + ": no entry for meter " + out.meters[j] + " at " + clock.timestamp(out.slots[k]));
  return out;
}

} // namespace fase::measure
