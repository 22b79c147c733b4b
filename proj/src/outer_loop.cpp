#include "dro/outer_loop.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace dro {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void ToleranceConfig::validate() const {
  require(eps > 0.0, "eps must be positive");
  require(eps1 > 0.0, "eps1 must be positive");
  require(eps1 <= 0.1 * eps_hat1,
          "eps1 must be well below the validity threshold");
  require(eps_hat1 < eps2, "validity threshold must stay below eps2");
}

Vector epsilon_subgradient(const CostFunction& cost, const Vector& x,
                           const SampleSet& samples,
                           const PerturbationSet& y) {
  require(y.n() == samples.size(), "one perturbation per sample required");
  require(y.m() == samples.dim(), "perturbation dimension mismatch");
  require(y.average_l1() <= y.radius() + 1e-9,
          "perturbations exceed the ball radius");
  const CostSlice slice = slice_at(cost, x);
  Vector g = Vector::Zero(cost.dim_x);
  for (Eigen::Index k = 0; k < samples.size(); ++k)
    g += slice.grad_x(samples[k] - y[k]);
  return g / static_cast<double>(samples.size());
}

Vector subgradient_step(const Vector& x, const Vector& g, long r) {
  require(r >= 1, "iteration index must be positive");
  require(g.size() == x.size(), "direction dimension mismatch");
  const double alpha = 1.0 / static_cast<double>(r);
  return x - alpha * g / std::max(g.norm(), 1.0);
}

ValidityCheck check_certificate_validity(const CostFunction& cost,
                                         const Vector& x,
                                         const SampleSet& samples,
                                         const CertificateReport& report,
                                         double eps_hat1) {
  const auto lp =
      lp_oracle(cost, x, samples, report.perturbations, report.radius);
  return ValidityCheck{lp.eta, lp.eta > eps_hat1};
}

PeriodResult run_period(OuterState state, const CostFunction& cost,
                        const SampleSet& samples, double radius, double beta_n,
                        const ToleranceConfig& tol, const PeriodHooks& hooks,
                        long iteration_cap) {
  tol.validate();
  require(state.x.size() == cost.dim_x, "decision dimension mismatch");
  require(samples.size() >= 1, "sample set must not be empty");

  PeriodResult out{.state = std::move(state)};
  OuterState& st = out.state;
  if (st.best_x.size() == 0) st.best_x = st.x;

  const auto checkpoint = [&](CheckpointKind kind) {
    return hooks.checkpoint && hooks.checkpoint(kind);
  };
  const auto expose = [&](const ExposureEvent& e) {
    if (hooks.expose) hooks.expose(e);
  };

  // A pre-fired stop signal returns immediately, r unchanged.
  if (checkpoint(CheckpointKind::subgradient_iteration)) {
    out.reason = PeriodStopReason::interrupted;
    return out;
  }

  long iterations_here = 0;
  bool need_certificate = true;  // every period opens with a generation pass
  while (true) {
    if (need_certificate) {
      need_certificate = false;
      if (hooks.certificate_started) hooks.certificate_started(st.r);
      std::optional<WarmStart> warm;
      if (st.report)
        warm = WarmStart{st.report->perturbations, st.report->vertex_set};
      else if (st.warm)
        warm = st.warm;

      CertificateOptions copts;
      copts.eps1 = tol.eps1;
      copts.beta_n = beta_n;
      if (hooks.checkpoint) {
        copts.interrupt = [&] {
          return hooks.checkpoint(CheckpointKind::afw_iteration);
        };
        copts.interrupt_round = [&] {
          return hooks.checkpoint(CheckpointKind::cg_round);
        };
      }
      auto cg = generate_certificate(cost, st.x, samples, radius, copts, warm);
      if (!cg.completed) {
        // Keep the partial hull state; there is no valid certificate at x.
        st.warm = WarmStart{cg.report.perturbations, cg.report.vertex_set};
        st.report.reset();
        out.reason = PeriodStopReason::interrupted;
        out.phase = SolvePhase::certificate;
        return out;
      }
      st.report = std::move(cg.report);
      st.warm.reset();
      ++out.certificates_completed;
      // Step sizes restart on a fresh period; a staleness regeneration
      // continues the schedule.
      if (!st.stale)
        st.r = 0;
      else
        st.stale = false;
      if (st.report->value < st.best_value) {
        st.best_value = st.report->value;
        st.best_x = st.x;
      }
      expose(ExposureEvent{st.report->value, st.report->gap, st.r, true, 0.0,
                           &st.x, &st.report->perturbations});
      if (checkpoint(CheckpointKind::certificate_done)) {
        out.reason = PeriodStopReason::interrupted;
        out.phase = SolvePhase::certificate;
        return out;
      }
    }

    while (true) {
      if (checkpoint(CheckpointKind::subgradient_iteration)) {
        out.reason = PeriodStopReason::interrupted;
        out.phase = SolvePhase::subgradient;
        return out;
      }
      const Vector g =
          epsilon_subgradient(cost, st.x, samples, st.report->perturbations);
      st.r += 1;
      ++iterations_here;
      Vector x_new = subgradient_step(st.x, g, st.r);
      const double step = (x_new - st.x).norm();
      out.last_step_norm = step;
      st.x = std::move(x_new);

      const auto validity = check_certificate_validity(
          cost, st.x, samples, *st.report, tol.eps_hat1);
      if (validity.stale) {
        st.stale = true;
        need_certificate = true;
        break;
      }
      const double value =
          certificate_value_at(cost, st.x, samples, st.report->perturbations);
      if (value < st.best_value) {
        st.best_value = value;
        st.best_x = st.x;
      }
      expose(ExposureEvent{value, validity.eta, st.r, false, step, &st.x,
                           &st.report->perturbations});
      if (step < tol.eps) {
        out.reason = PeriodStopReason::converged;
        out.phase = SolvePhase::subgradient;
        return out;
      }
      if (iterations_here >= iteration_cap) {
        out.reason = PeriodStopReason::iteration_cap;
        out.phase = SolvePhase::subgradient;
        return out;
      }
    }
  }
}

}  // namespace dro
