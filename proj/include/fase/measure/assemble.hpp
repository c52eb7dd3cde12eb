#pragma once

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "fase/common/error.hpp"
#include "fase/measure/measurement.hpp"

namespace fase::measure {

/// Stacked measurement vector of one slot.
struct Assembled {
  std::vector<MeasurementSpec> specs; ///< row index -> channel
  std::vector<Origin> origin;
  Eigen::VectorXd z;
  Eigen::VectorXd r; ///< diagonal of R

  int size() const { return static_cast<int>(specs.size()); }
};

/// Stacks real-time readings, pseudo-measurements and virtual zero-injections.
///
/// Rows are sorted by (kind, bus, to-bus, phase), so the result depends only on
/// the set of inputs. Virtual entries read zero with variance sigma^2.
inline Assembled assemble_measurement_vector(const std::vector<Measurement>& real_time,
                                             const std::vector<Measurement>& pseudo,
                                             const std::vector<MeasurementSpec>& virtual_zero) {
  std::vector<Measurement> all;
  all.reserve(real_time.size() + pseudo.size() + virtual_zero.size());
  for (auto m : real_time) {
    m.origin = Origin::real_time;
    all.push_back(m);
  }
  for (auto m : pseudo) {
    m.origin = Origin::pseudo;
    all.push_back(m);
  }
  for (const auto& s : virtual_zero)
    all.push_back({s, 0.0, s.sigma * s.sigma, Origin::virtual_zero});

  auto key = [](const Measurement& m) {
    const auto& l = m.spec.location;
    return std::tie(m.spec.kind, l.bus, l.to_bus, l.phase);
  };
  std::stable_sort(all.begin(), all.end(), [&](const Measurement& a, const Measurement& b) { return key(a) < key(b); });

  Assembled out;
  const auto n = static_cast<Eigen::Index>(all.size());
  out.z.resize(n);
  out.r.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& m = all[i];
    if (i > 0 && key(all[i - 1]) == key(m))
      throw DomainError(std::string("duplicate measurement ") + kind_name(m.spec.kind) + " at " +
                        m.spec.location.label() + "." + grid::phase_char(m.spec.location.phase));
    if (!(m.variance > 0.0))
      throw DomainError(std::string("measurement ") + kind_name(m.spec.kind) + " at " + m.spec.location.label() +
                        " has non-positive variance");
    out.specs.push_back(m.spec);
    out.origin.push_back(m.origin);
    out.z[i] = m.value;
    out.r[i] = m.variance;
  }
  return out;
}

} // namespace fase::measure
