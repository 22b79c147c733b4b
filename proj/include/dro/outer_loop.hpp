#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <optional>

#include "dro/ambiguity.hpp"
#include "dro/certificate.hpp"
#include "dro/cost.hpp"

namespace dro {

/// Tolerance ladder derived from the single user tolerance eps: the
/// certificate-validity threshold sits two orders below eps and the
/// certificate-generation tolerance two orders below that, so the ordering
/// 0 < eps1 << eps_hat1 < eps2 always holds for the defaults.
struct ToleranceConfig {
  double eps;       // step-size termination threshold
  double eps_hat1;  // validity threshold for re-using a worst-case distribution
  double eps1;      // certificate generation tolerance
  double eps2;      // outer optimality target

  static ToleranceConfig from_eps(double eps) {
    return ToleranceConfig{eps, 1e-2 * eps, 1e-4 * eps, eps};
  }
  void validate() const;
};

/// State of the decision sequence inside one time period. The report holds
/// the active worst-case distribution; stale means its linearized gap at the
/// current decision exceeded the validity threshold and it must be
/// regenerated before the next exposure.
struct OuterState {
  Vector x;
  long r = 0;
  Vector best_x;
  double best_value = std::numeric_limits<double>::infinity();
  std::optional<CertificateReport> report;
  bool stale = false;
  /// Projected warm-start state for the next regeneration, set between
  /// periods when no full report exists yet.
  std::optional<WarmStart> warm;
};

/// Average decision-gradient of the shifted costs; an eps-subgradient of the
/// certificate at x whenever y is an eps-optimal perturbation at x.
Vector epsilon_subgradient(const CostFunction& cost, const Vector& x,
                           const SampleSet& samples, const PerturbationSet& y);

/// x - (1/r) * g / max(||g||, 1).
Vector subgradient_step(const Vector& x, const Vector& g, long r);

struct ValidityCheck {
  double eta = 0.0;
  bool stale = false;
};

/// Runs the linear oracle at the new decision against the report's
/// perturbations; when the gap stays within eps_hat1 the old distribution
/// re-scored at x is still a valid certificate there.
ValidityCheck check_certificate_validity(const CostFunction& cost,
                                         const Vector& x,
                                         const SampleSet& samples,
                                         const CertificateReport& report,
                                         double eps_hat1);

enum class CheckpointKind {
  afw_iteration,
  cg_round,
  subgradient_iteration,
  certificate_done,
  period_end,
};

enum class PeriodStopReason { converged, interrupted, iteration_cap };
enum class SolvePhase { certificate, subgradient };

struct ExposureEvent {
  double value = 0.0;
  double gap = 0.0;
  long r = 0;
  bool fresh_certificate = false;
  double step_norm = 0.0;
  const Vector* x = nullptr;
  const PerturbationSet* perturbations = nullptr;
};

struct PeriodHooks {
  /// Polled at every solver boundary; returning true aborts the period (new
  /// data was admitted).
  std::function<bool(CheckpointKind)> checkpoint;
  /// Called whenever a (decision, value, gap) triple becomes exposable.
  std::function<void(const ExposureEvent&)> expose;
  std::function<void(long r)> certificate_started;
};

struct PeriodResult {
  OuterState state;
  PeriodStopReason reason = PeriodStopReason::converged;
  SolvePhase phase = SolvePhase::subgradient;
  long certificates_completed = 0;
  double last_step_norm = std::numeric_limits<double>::infinity();
};

/// Drives the decision sequence within one time period: regenerates the
/// certificate whenever it goes stale (warm-started from the active vertex
/// set), takes normalized subgradient steps with step size 1/r, and tracks
/// the best recorded value. Terminates when a step falls below tol.eps with
/// a non-stale certificate, when the checkpoint hook fires, or at the
/// iteration cap (flagged, not thrown).
PeriodResult run_period(OuterState state, const CostFunction& cost,
                        const SampleSet& samples, double radius, double beta_n,
                        const ToleranceConfig& tol,
                        const PeriodHooks& hooks = {},
                        long iteration_cap = 100000);

}  // namespace dro
