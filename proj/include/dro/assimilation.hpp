#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dro/ambiguity.hpp"
#include "dro/certificate.hpp"
#include "dro/cost.hpp"
#include "dro/outer_loop.hpp"

namespace dro {

/// Appends a zero shift for the incoming sample and, when the enlarged set
/// violates the new ball, rescales every shift by
/// ((n+1) * radius_new) / (n * radius_old). The result is always feasible at
/// (n+1, radius_new); the boundary case keeps the unscaled shifts.
PerturbationSet project_perturbations(const PerturbationSet& y,
                                      double radius_new);

/// Re-indexes a candidate vertex set into the enlarged simplex: sparse
/// vertices keep their (sample, coordinate, sign) triples and only the scale
/// changes to (n+1) * radius_new. The origin pseudo-vertex is preserved and
/// the set size never changes.
VertexSet project_vertex_set(const VertexSet& vertices, double radius_new);

/// Warm-start package carried from sample count n to n+1.
struct PeriodTransition {
  long n_old = 0;
  double radius_old = 0.0;
  double radius_new = 0.0;
  PerturbationSet projected_y;
  VertexSet projected_vertices;
};

PeriodTransition project_transition(const PerturbationSet& y,
                                    const VertexSet& vertices,
                                    double radius_new);

/// Period speed taxonomy. sufficiently_slow implies slow, and very_fast
/// implies fast; a period can be slow and fast at once (a certificate
/// completed but no optimal iterate was reached).
enum class StreamClassLabel { sufficiently_slow, slow, very_fast };

struct StreamClass {
  StreamClassLabel label = StreamClassLabel::very_fast;

  bool is_sufficiently_slow() const {
    return label == StreamClassLabel::sufficiently_slow;
  }
  bool is_slow() const { return label != StreamClassLabel::very_fast; }
  bool is_fast() const { return label != StreamClassLabel::sufficiently_slow; }
  bool is_very_fast() const { return label == StreamClassLabel::very_fast; }
  const char* name() const;
};

StreamClass classify_period(long certificates_completed,
                            bool reached_optimal_iterate);

/// Admission rule for buffered arrivals: after a fast period they wait for a
/// certificate-completion or period-termination checkpoint; otherwise any
/// solver boundary admits. Samples are never dropped or reordered.
bool may_admit(CheckpointKind kind,
               const std::optional<StreamClass>& last_period);

/// Run clock. The virtual clock advances a fixed increment per solver
/// checkpoint and jumps over idle waits, which makes runs exactly
/// reproducible; the wall clock measures real time and sleeps through idle
/// waits.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now_s() const = 0;
  virtual void tick() = 0;
  virtual void advance_to(double t_s) = 0;
  virtual bool is_virtual() const = 0;
};

class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(double tick_ms = 0.1) : tick_s_(tick_ms / 1000.0) {}
  double now_s() const override { return t_; }
  void tick() override { t_ += tick_s_; }
  void advance_to(double t_s) override { t_ = std::max(t_, t_s); }
  bool is_virtual() const override { return true; }

 private:
  double t_ = 0.0;
  double tick_s_;
};

class WallClock final : public Clock {
 public:
  WallClock();
  double now_s() const override;
  void tick() override {}
  void advance_to(double t_s) override;
  bool is_virtual() const override { return false; }

 private:
  std::chrono::steady_clock::time_point start_;
};

struct TimedSample {
  double t_s = 0.0;
  Vector xi;
};

/// Ordered source of streamed samples. poll is non-blocking and respects
/// arrival times; wait_for_arrival blocks (real-time sources) until data is
/// available or the stream closes.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual Eigen::Index dim() const = 0;
  virtual std::optional<TimedSample> poll(double now_s) = 0;
  virtual std::optional<double> next_arrival_hint() const = 0;
  virtual bool exhausted() const = 0;
  virtual void wait_for_arrival() {}
};

/// Deterministic pre-scheduled stream; arrivals become visible once the run
/// clock passes their timestamps.
class ScheduledStream final : public SampleSource {
 public:
  ScheduledStream(std::vector<TimedSample> schedule, Eigen::Index dim);

  Eigen::Index dim() const override { return dim_; }
  std::optional<TimedSample> poll(double now_s) override;
  std::optional<double> next_arrival_hint() const override;
  bool exhausted() const override { return next_ >= schedule_.size(); }

 private:
  std::vector<TimedSample> schedule_;
  std::size_t next_ = 0;
  Eigen::Index dim_;
};

/// Replays a schedule in real time from a producer thread through a bounded
/// queue; the producer blocks when the queue is full. One producer, one
/// consumer.
class RealTimeStream final : public SampleSource {
 public:
  RealTimeStream(std::vector<TimedSample> schedule, Eigen::Index dim,
                 std::size_t capacity = 1024);
  ~RealTimeStream() override;

  Eigen::Index dim() const override { return dim_; }
  std::optional<TimedSample> poll(double now_s) override;
  std::optional<double> next_arrival_hint() const override {
    return std::nullopt;
  }
  bool exhausted() const override;
  void wait_for_arrival() override;

 private:
  Eigen::Index dim_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable consumer_cv_;
  std::condition_variable producer_cv_;
  std::deque<TimedSample> queue_;
  bool closed_ = false;
  std::thread producer_;
};

struct LogEvent {
  enum class Kind {
    arrival,
    admitted,
    cert_start,
    cert_done,
    step,
    period_end,
    terminate,
  };
  double t_s = 0.0;
  Kind kind = Kind::step;
  long n = 0;
  long r = 0;
  std::optional<double> value;
  std::optional<double> gap;
  std::optional<std::string> stream_class;
};

const char* log_event_name(LogEvent::Kind kind);
std::string to_json_line(const LogEvent& event);

struct RunCaps {
  long period_iteration_cap = 100000;
  double wall_limit_s = std::numeric_limits<double>::infinity();
};

struct OnlineHooks {
  std::function<void(const LogEvent&)> log;
  /// Anytime-contract observer: fires at every exposure with the sample
  /// count it was produced under.
  std::function<void(const ExposureEvent&, long n)> expose;
};

struct OnlineResult {
  Vector x;
  std::optional<CertificateReport> report;
  long n = 0;
  bool flagged = false;
  std::vector<StreamClass> period_classes;
};

/// Streams samples through successive solve periods: each admission projects
/// the active perturbations and vertex set into the enlarged problem, seeds
/// the decision per the phase it interrupted, and resumes the period driver.
/// Returns once the stream is exhausted and the final period terminates
/// naturally; the result carries a fresh certificate for the best decision.
/// After the first certificate exists, every exposure carries a valid
/// (x, value, gap) triple.
OnlineResult run_online(const CostFunction& cost, SampleSource& source,
                        Clock& clock, const ToleranceConfig& tol,
                        const RadiusParams& params,
                        const ReliabilitySchedule& schedule, Vector x0,
                        const RunCaps& caps = {},
                        const OnlineHooks& hooks = {});

}  // namespace dro
