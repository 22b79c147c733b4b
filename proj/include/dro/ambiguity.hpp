#pragma once

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <vector>

#include "dro/cost.hpp"
#include "dro/distribution.hpp"

namespace dro {

/// Append-only set of streamed uncertainty realizations. A sample is never
/// mutated after insertion, so snapshots taken by index are stable. One
/// thread appends; concurrent readers must hold snapshots (n, radius) as
/// values.
class SampleSet {
 public:
  explicit SampleSet(Eigen::Index dim);

  void append(Vector xi);
  Eigen::Index dim() const { return dim_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(samples_.size()); }
  bool empty() const { return samples_.empty(); }
  const Vector& operator[](Eigen::Index k) const { return samples_.at(static_cast<std::size_t>(k)); }
  const std::vector<Vector>& samples() const { return samples_; }

 private:
  Eigen::Index dim_;
  std::vector<Vector> samples_;
};

/// Uniform discrete measure on the streamed samples.
DiscreteDistribution empirical_distribution(const SampleSet& samples);

/// Concentration constants for the ambiguity-ball radius. c1 and c2 depend
/// only on the uncertainty dimension and the tail exponent a > 1; they are
/// user parameters here, never estimated from data. The dimension m = 2 is
/// outside the validity of the radius formula and is rejected outright.
struct RadiusParams {
  double c1;
  double c2;
  double a;
  Eigen::Index dim_xi;

  RadiusParams(double c1, double c2, double a, Eigen::Index dim_xi);
};

/// Radius of the ambiguity ball at sample count n and confidence level
/// beta_n: with L = log(c1/beta_n)/c2, returns (L/n)^(1/max{2,m}) when
/// n >= L and (L/n)^(1/a) otherwise. Both branches agree at n = L.
/// Requires beta_n in (0,1) and beta_n < c1.
double wasserstein_radius(const RadiusParams& params, long n, double beta_n);

/// The built-in confidence schedule beta_n = 0.95 * exp(1 - sqrt(n)).
double default_beta(long n);

/// Strictly decreasing confidence levels with finite sum. The built-in
/// schedule satisfies both analytically; user schedules are checked for
/// strict monotonicity over the run horizon.
class ReliabilitySchedule {
 public:
  static ReliabilitySchedule default_schedule();
  explicit ReliabilitySchedule(std::function<double(long)> beta);

  double operator()(long n) const;
  void check_monotone(long horizon) const;

 private:
  std::function<double(long)> beta_;
};

/// Reads JSON-lines sample records {"n": k, "xi": [...]} in order; throws on
/// malformed records or out-of-order indices.
std::vector<Vector> read_samples_jsonl(std::istream& in, Eigen::Index dim);
void write_samples_jsonl(std::ostream& out, const std::vector<Vector>& samples);

}  // namespace dro
