#include "dro/assimilation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace dro {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

PerturbationSet project_perturbations(const PerturbationSet& y,
                                      double radius_new) {
  require(radius_new >= 0.0, "radius must be nonnegative");
  const auto n = y.n();
  const auto m = y.m();
  std::vector<Vector> shifts = y.shifts();
  shifts.push_back(Vector::Zero(m));

  double total = 0.0;
  for (const auto& s : shifts) total += s.lpNorm<1>();
  const double avg = total / static_cast<double>(n + 1);
  if (avg <= radius_new) return PerturbationSet(std::move(shifts), radius_new);

  // avg > radius_new >= 0 implies the old shifts (and the old radius) are
  // nonzero, so the rescale is well defined.
  const double factor = (static_cast<double>(n + 1) * radius_new) /
                        (static_cast<double>(n) * y.radius());
  for (auto& s : shifts) s *= factor;
  return PerturbationSet(std::move(shifts), radius_new);
}

VertexSet project_vertex_set(const VertexSet& vertices, double radius_new) {
  require(radius_new >= 0.0, "radius must be nonnegative");
  const auto n_new = vertices.n() + 1;
  VertexSet out(n_new, vertices.m(),
                static_cast<double>(n_new) * radius_new);
  for (const auto& v : vertices.vertices())
    if (!v.is_origin()) out.add(v);
  return out;
}

PeriodTransition project_transition(const PerturbationSet& y,
                                    const VertexSet& vertices,
                                    double radius_new) {
  require(y.n() == vertices.n() && y.m() == vertices.m(),
          "perturbations and vertex set disagree on shape");
  return PeriodTransition{
      .n_old = static_cast<long>(y.n()),
      .radius_old = y.radius(),
      .radius_new = radius_new,
      .projected_y = project_perturbations(y, radius_new),
      .projected_vertices = project_vertex_set(vertices, radius_new),
  };
}

const char* StreamClass::name() const {
  switch (label) {
    case StreamClassLabel::sufficiently_slow:
      return "sufficiently_slow";
    case StreamClassLabel::slow:
      return "slow";
    case StreamClassLabel::very_fast:
      return "very_fast";
  }
  return "unknown";
}

StreamClass classify_period(long certificates_completed,
                            bool reached_optimal_iterate) {
  if (reached_optimal_iterate)
    return StreamClass{StreamClassLabel::sufficiently_slow};
  if (certificates_completed > 0) return StreamClass{StreamClassLabel::slow};
  return StreamClass{StreamClassLabel::very_fast};
}

bool may_admit(CheckpointKind kind,
               const std::optional<StreamClass>& last_period) {
  const bool completion = kind == CheckpointKind::certificate_done ||
                          kind == CheckpointKind::period_end;
  if (last_period && last_period->is_fast()) return completion;
  return true;
}

WallClock::WallClock() : start_(std::chrono::steady_clock::now()) {}

double WallClock::now_s() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start_)
      .count();
}

void WallClock::advance_to(double t_s) {
  const double remaining = t_s - now_s();
  if (remaining > 0)
    std::this_thread::sleep_for(std::chrono::duration<double>(
        std::min(remaining, 0.05)));
}

ScheduledStream::ScheduledStream(std::vector<TimedSample> schedule,
                                 Eigen::Index dim)
    : schedule_(std::move(schedule)), dim_(dim) {
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& s : schedule_) {
    require(s.xi.size() == dim_, "sample dimension mismatch in schedule");
    require(s.t_s >= prev, "schedule must be ordered by arrival time");
    prev = s.t_s;
  }
}

std::optional<TimedSample> ScheduledStream::poll(double now_s) {
  if (next_ >= schedule_.size()) return std::nullopt;
  if (schedule_[next_].t_s > now_s) return std::nullopt;
  return schedule_[next_++];
}

std::optional<double> ScheduledStream::next_arrival_hint() const {
  if (next_ >= schedule_.size()) return std::nullopt;
  return schedule_[next_].t_s;
}

RealTimeStream::RealTimeStream(std::vector<TimedSample> schedule,
                               Eigen::Index dim, std::size_t capacity)
    : dim_(dim), capacity_(capacity) {
  require(capacity_ >= 1, "queue capacity must be positive");
  producer_ = std::thread([this, schedule = std::move(schedule)]() mutable {
    const auto start = std::chrono::steady_clock::now();
    for (auto& s : schedule) {
      std::this_thread::sleep_until(
          start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                      std::chrono::duration<double>(s.t_s)));
      std::unique_lock lock(mu_);
      producer_cv_.wait(lock, [this] { return queue_.size() < capacity_; });
      queue_.push_back(std::move(s));
      consumer_cv_.notify_all();
    }
    std::unique_lock lock(mu_);
    closed_ = true;
    consumer_cv_.notify_all();
  });
}

RealTimeStream::~RealTimeStream() {
  if (producer_.joinable()) producer_.join();
}

std::optional<TimedSample> RealTimeStream::poll(double) {
  std::unique_lock lock(mu_);
  if (queue_.empty()) return std::nullopt;
  TimedSample s = std::move(queue_.front());
  queue_.pop_front();
  producer_cv_.notify_all();
  return s;
}

bool RealTimeStream::exhausted() const {
  std::unique_lock lock(mu_);
  return closed_ && queue_.empty();
}

void RealTimeStream::wait_for_arrival() {
  std::unique_lock lock(mu_);
  consumer_cv_.wait_for(lock, std::chrono::milliseconds(20),
                        [this] { return closed_ || !queue_.empty(); });
}

const char* log_event_name(LogEvent::Kind kind) {
  switch (kind) {
    case LogEvent::Kind::arrival:
      return "arrival";
    case LogEvent::Kind::admitted:
      return "admitted";
    case LogEvent::Kind::cert_start:
      return "cert_start";
    case LogEvent::Kind::cert_done:
      return "cert_done";
    case LogEvent::Kind::step:
      return "step";
    case LogEvent::Kind::period_end:
      return "period_end";
    case LogEvent::Kind::terminate:
      return "terminate";
  }
  return "unknown";
}

std::string to_json_line(const LogEvent& event) {
  nlohmann::ordered_json j;
  j["t_wall_s"] = event.t_s;
  j["event"] = log_event_name(event.kind);
  j["n"] = event.n;
  j["r"] = event.r;
  if (event.value) j["value"] = *event.value;
  if (event.gap) j["gap"] = *event.gap;
  if (event.stream_class) j["class"] = *event.stream_class;
  return j.dump();
}

namespace {

struct OnlineDriver {
  const CostFunction& cost;
  SampleSource& source;
  Clock& clock;
  const ToleranceConfig& tol;
  const RadiusParams& params;
  const ReliabilitySchedule& schedule;
  const RunCaps& caps;
  const OnlineHooks& hooks;

  SampleSet samples;
  OuterState state;
  std::deque<TimedSample> pending;
  std::optional<TimedSample> admitted;
  std::optional<StreamClass> last_class;
  std::vector<StreamClass> classes;
  long n = 0;
  double radius = 0.0;
  double beta = 0.0;
  bool flagged = false;

  OnlineDriver(const CostFunction& cost_in, SampleSource& source_in,
               Clock& clock_in, const ToleranceConfig& tol_in,
               const RadiusParams& params_in,
               const ReliabilitySchedule& schedule_in, Vector x0,
               const RunCaps& caps_in, const OnlineHooks& hooks_in)
      : cost(cost_in), source(source_in), clock(clock_in), tol(tol_in),
        params(params_in), schedule(schedule_in), caps(caps_in),
        hooks(hooks_in), samples(source_in.dim()) {
    state.x = std::move(x0);
    state.best_x = state.x;
  }

  void log(const LogEvent& e) {
    if (hooks.log) hooks.log(e);
  }

  LogEvent event(double t, LogEvent::Kind kind, long n_field, long r_field) {
    LogEvent e;
    e.t_s = t;
    e.kind = kind;
    e.n = n_field;
    e.r = r_field;
    return e;
  }

  void drain_source() {
    while (auto s = source.poll(clock.now_s())) {
      log(event(s->t_s, LogEvent::Kind::arrival, n, 0));
      pending.push_back(std::move(*s));
    }
  }

  /// Checkpoint callback handed to the period driver: advances the clock,
  /// surfaces new arrivals, and decides admission per the hold policy.
  bool checkpoint(CheckpointKind kind) {
    clock.tick();
    drain_source();
    if (pending.empty() || admitted) return admitted.has_value();
    if (!may_admit(kind, last_class)) return false;
    admitted = std::move(pending.front());
    pending.pop_front();
    return true;
  }

  /// Blocks (or jumps the virtual clock) until an arrival is buffered;
  /// returns false when the stream is exhausted for good.
  bool wait_for_pending() {
    drain_source();
    while (pending.empty()) {
      if (source.exhausted()) return false;
      if (auto hint = source.next_arrival_hint())
        clock.advance_to(*hint);
      else
        source.wait_for_arrival();
      drain_source();
    }
    return true;
  }

  /// Admits the front buffered sample: appends it, projects the active
  /// perturbations and vertex set into the enlarged problem, and seeds the
  /// decision according to the phase the arrival interrupted.
  void start_next_period(SolvePhase phase) {
    TimedSample sample = std::move(*admitted);
    admitted.reset();
    samples.append(std::move(sample.xi));
    n += 1;
    beta = schedule(n);
    const double radius_new = wasserstein_radius(params, n, beta);

    if (n == 1) {
      state.warm.reset();
      state.report.reset();
    } else {
      // A period interrupted before its first certificate leaves neither a
      // report nor a partial hull; project the zero shifts then.
      if (!state.report && !state.warm)
        state.warm = WarmStart{
            PerturbationSet::zeros(n - 1, samples.dim(), radius),
            VertexSet(n - 1, samples.dim(),
                      static_cast<double>(n - 1) * radius)};
      const PerturbationSet& y_old =
          state.report ? state.report->perturbations
                       : state.warm->perturbations;
      const VertexSet& verts_old =
          state.report ? state.report->vertex_set : state.warm->vertices;
      state.warm = WarmStart{project_perturbations(y_old, radius_new),
                             project_vertex_set(verts_old, radius_new)};
      state.report.reset();
      if (phase == SolvePhase::subgradient && state.best_x.size() > 0 &&
          std::isfinite(state.best_value))
        state.x = state.best_x;
    }
    radius = radius_new;
    state.best_x = state.x;
    state.best_value = std::numeric_limits<double>::infinity();
    log(event(clock.now_s(), LogEvent::Kind::admitted, n, state.r));
  }

  void close_period(long certificates, bool reached) {
    const StreamClass cls = classify_period(certificates, reached);
    classes.push_back(cls);
    last_class = cls;
    LogEvent e = event(clock.now_s(), LogEvent::Kind::period_end, n, state.r);
    e.stream_class = cls.name();
    log(e);
  }

  PeriodHooks period_hooks() {
    PeriodHooks ph;
    ph.checkpoint = [this](CheckpointKind kind) { return checkpoint(kind); };
    ph.certificate_started = [this](long r) {
      log(event(clock.now_s(), LogEvent::Kind::cert_start, n, r));
    };
    ph.expose = [this](const ExposureEvent& e) {
      LogEvent ev = event(clock.now_s(),
                          e.fresh_certificate ? LogEvent::Kind::cert_done
                                              : LogEvent::Kind::step,
                          n, e.r);
      ev.value = e.value;
      ev.gap = e.gap;
      log(ev);
      if (hooks.expose) hooks.expose(e, n);
    };
    return ph;
  }

  OnlineResult finalize(bool clean) {
    OnlineResult result;
    result.n = n;
    result.period_classes = classes;
    result.flagged = flagged || !clean;
    result.x = state.best_x.size() > 0 ? state.best_x : state.x;
    if (n >= 1 && (state.report || state.warm)) {
      CertificateOptions copts;
      copts.eps1 = tol.eps1;
      copts.beta_n = beta;
      std::optional<WarmStart> warm;
      if (state.report)
        warm = WarmStart{state.report->perturbations,
                         state.report->vertex_set};
      else
        warm = state.warm;
      auto cg =
          generate_certificate(cost, result.x, samples, radius, copts, warm);
      result.report = std::move(cg.report);
      LogEvent e = event(clock.now_s(), LogEvent::Kind::terminate, n, state.r);
      e.value = result.report->value;
      e.gap = result.report->gap;
      log(e);
    } else {
      log(event(clock.now_s(), LogEvent::Kind::terminate, n, state.r));
    }
    return result;
  }

  OnlineResult run() {
    if (!wait_for_pending()) return finalize(true);  // empty stream
    admitted = std::move(pending.front());
    pending.pop_front();
    start_next_period(SolvePhase::subgradient);

    while (true) {
      if (clock.now_s() > caps.wall_limit_s) {
        flagged = true;
        return finalize(false);
      }
      auto pr = run_period(std::move(state), cost, samples, radius, beta, tol,
                           period_hooks(), caps.period_iteration_cap);
      state = std::move(pr.state);

      if (pr.reason == PeriodStopReason::interrupted) {
        close_period(pr.certificates_completed, false);
        start_next_period(pr.phase);
        continue;
      }
      if (pr.reason == PeriodStopReason::iteration_cap) flagged = true;
      const bool reached = pr.reason == PeriodStopReason::converged;

      if (!wait_for_pending()) {
        close_period(pr.certificates_completed, reached);
        return finalize(true);
      }
      close_period(pr.certificates_completed, reached);
      admitted = std::move(pending.front());
      pending.pop_front();
      start_next_period(SolvePhase::subgradient);
    }
  }
};

}  // namespace

OnlineResult run_online(const CostFunction& cost, SampleSource& source,
                        Clock& clock, const ToleranceConfig& tol,
                        const RadiusParams& params,
                        const ReliabilitySchedule& schedule, Vector x0,
                        const RunCaps& caps, const OnlineHooks& hooks) {
  tol.validate();
  require(x0.size() == cost.dim_x, "initial decision dimension mismatch");
  require(params.dim_xi == source.dim(), "uncertainty dimension mismatch");
  OnlineDriver driver(cost, source, clock, tol, params, schedule,
                      std::move(x0), caps, hooks);
  return driver.run();
}

}  // namespace dro
