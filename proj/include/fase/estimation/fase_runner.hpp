#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fase/common/error.hpp"
#include "fase/estimation/ekf.hpp"
#include "fase/estimation/holt.hpp"
#include "fase/estimation/measurement_model.hpp"
#include "fase/estimation/state.hpp"
#include "fase/estimation/tuner.hpp"
#include "fase/measure/assemble.hpp"

namespace fase::est {

struct FaseConfig {
  TunerParams tuner;
  SmoothingParams init{0.7, 0.3};
  double q_proc = 1e-6;
  CorrectionOptions correction;
  bool adaptive = true;
  /// Branch whose phase current magnitudes drive the tuner ("from", "to").
  std::string rate_from;
  std::string rate_to;
  bool keep_covariance = false; ///< store full P per slot (memory grows with n^2)
  bool check_psd = true;        ///< record the smallest eigenvalue of P per slot
};

struct SlotEstimate {
  long slot = 0;
  Eigen::VectorXd x_pred; ///< empty on the initial slot
  Eigen::VectorXd x;
  Eigen::VectorXd p_diag;
  Eigen::MatrixXd P; ///< only with keep_covariance
  double p_min_eig = 0.0;
  std::array<SmoothingParams, 3> params{};
  std::array<double, 3> branch_current{}; ///< pu, per phase (0 where absent)
  std::array<double, 3> branch_rate{};    ///< |I_k - I_{k-1}|
  Eigen::VectorXd residual;               ///< z - h(x)
  double objective_prior = 0.0;
  double objective_post = 0.0;
};

struct FaseTrace {
  std::vector<SlotEstimate> slots;
};

namespace detail {

template <class F>
auto with_slot(long slot, F&& f) -> decltype(f()) {
  const std::string at = "slot " + std::to_string(slot) + ": ";
  try {
    return f();
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
  }
}

inline std::vector<grid::Phase> component_phases(const StateLayout& layout) {
  std::vector<grid::Phase> out(layout.size());
  for (int i = 0; i < layout.size(); ++i)
    out[i] = layout.phase_of(i);
  return out;
}

} // namespace detail

/// Phase current magnitudes on the rate branch: measured where a current
/// channel exists, otherwise evaluated at `x`.
inline std::array<double, 3> rate_currents(const grid::NetworkModel& net, const StateLayout& layout,
                                           const std::vector<measure::Measurement>& entries,
                                           const std::optional<std::pair<int, int>>& branch, const FaseConfig& cfg,
                                           const Eigen::VectorXd& x) {
  std::array<double, 3> out{};
  if (!branch)
    return out;
  const auto& br = net.branches()[branch->first];
  for (grid::Phase p : br.phases) {
    bool found = false;
    for (const auto& m : entries) {
      const auto& l = m.spec.location;
      if (m.spec.kind == measure::Kind::branch_current_mag && l.phase == p &&
          ((l.bus == cfg.rate_from && l.to_bus == cfg.rate_to) || (l.bus == cfg.rate_to && l.to_bus == cfg.rate_from))) {
        out[static_cast<int>(p)] = m.value;
        found = true;
        break;
      }
    }
    if (!found) {
      const MeasurementModel probe(layout, {{measure::Kind::branch_current_mag, {cfg.rate_from, cfg.rate_to, p}, 1.0}});
      out[static_cast<int>(p)] = probe.evaluate(x)[0];
    }
  }
  return out;
}

/// Forecasting-aided state estimation over a measurement stream.
///
/// The first slot is initialised by weighted least squares from a flat start.
/// Every later slot runs the Holt prediction, the covariance time update, the
/// smoothing-parameter adaptation and the EKF correction, in that order.
/// `pseudo` is either empty or aligned slot by slot with `real_time`.
inline FaseTrace run_fase(const grid::NetworkModel& net, const std::vector<measure::MeasurementSet>& real_time,
                          const std::vector<measure::MeasurementSet>& pseudo,
                          const std::vector<measure::MeasurementSpec>& virtual_zero, const FaseConfig& cfg) {
  if (real_time.empty())
    throw DomainError("run_fase: empty measurement stream");
  if (!pseudo.empty() && pseudo.size() != real_time.size())
    throw DomainError("run_fase: pseudo-measurement stream has " + std::to_string(pseudo.size()) +
                      " slots, real-time stream has " + std::to_string(real_time.size()));
  for (std::size_t k = 0; k < pseudo.size(); ++k)
    if (pseudo[k].slot != real_time[k].slot)
      throw DomainError("run_fase: streams are not time-aligned at position " + std::to_string(k));
  if (!(cfg.q_proc >= 0.0))
    throw ConfigError("run_fase: q_proc must be non-negative");
  cfg.tuner.validate();
  check_smoothing(cfg.init);

  const StateLayout layout(net);
  std::optional<std::pair<int, int>> rate_branch;
  if (!cfg.rate_from.empty()) {
    rate_branch = net.find_branch(cfg.rate_from, cfg.rate_to);
    if (!rate_branch)
      throw ConfigError("run_fase: unknown rate branch " + cfg.rate_from + "->" + cfg.rate_to);
  }

  static const std::vector<measure::Measurement> none;
  FaseTrace trace;
  trace.slots.reserve(real_time.size());
  HoltState holt;
  Eigen::MatrixXd P;
  std::array<double, 3> prev_rate{};

  for (std::size_t k = 0; k < real_time.size(); ++k) {
    const long slot = real_time[k].slot;
    detail::with_slot(slot, [&] {
      const auto asm_ = measure::assemble_measurement_vector(real_time[k].entries,
                                                             pseudo.empty() ? none : pseudo[k].entries, virtual_zero);
      const MeasurementModel model(layout, asm_.specs);
      SlotEstimate out;
      out.slot = slot;

      Correction c;
      Eigen::VectorXd x_ref; // state at which unmeasured rate currents are evaluated
      if (k == 0) {
        c = wls_estimate(layout.flat_start(), asm_.z, asm_.r, model, cfg.correction);
        holt = HoltState::start(c.x, detail::component_phases(layout), cfg.init);
        x_ref = c.x;
      } else {
        const auto pred = holt_update(trace.slots.back().x, holt);
        holt = pred.state;
        const Eigen::MatrixXd P_pred = predict_covariance(P, pred.F, cfg.q_proc);
        out.x_pred = pred.x_pred;
        x_ref = pred.x_pred;
        // The adaptation needs this slot's current, available before correction.
        out.branch_current = rate_currents(net, layout, real_time[k].entries, rate_branch, cfg, x_ref);
        for (int p = 0; p < 3; ++p)
          out.branch_rate[p] = std::abs(out.branch_current[p] - trace.slots.back().branch_current[p]);
        if (cfg.adaptive && k >= 2)
          for (int p = 0; p < 3; ++p)
            holt.params[p] = adapt_smoothing(holt.params[p], cfg.tuner, prev_rate[p], out.branch_rate[p]);
        c = ekf_correct(pred.x_pred, P_pred, asm_.z, asm_.r, model, cfg.correction);
      }
      if (k == 0)
        out.branch_current = rate_currents(net, layout, real_time[k].entries, rate_branch, cfg, x_ref);
      prev_rate = out.branch_rate;

      P = c.P;
      out.x = c.x;
      out.p_diag = c.P.diagonal();
      if (cfg.keep_covariance)
        out.P = c.P;
      if (cfg.check_psd)
        out.p_min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c.P, Eigen::EigenvaluesOnly).eigenvalues()[0];
      out.params = holt.params;
      out.residual = model.residual(asm_.z, c.x);
      out.objective_prior = c.objective_prior;
      out.objective_post = c.objective_post;
      trace.slots.push_back(std::move(out));
    });
  }
  return trace;
}

} // namespace fase::est
