#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "dro/ambiguity.hpp"
#include "dro/cost.hpp"
#include "dro/distribution.hpp"

namespace dro {

/// Extreme point of the perturbation simplex, stored sparsely: sample index,
/// coordinate, and side. The all-zero origin is a pseudo-vertex (it is not an
/// extreme point of the simplex) kept so the convex hull can always represent
/// "no perturbation".
struct SparseVertex {
  Eigen::Index sample = -1;
  Eigen::Index coord = -1;
  int sign = 0;

  static SparseVertex origin() { return SparseVertex{}; }
  bool is_origin() const { return sample < 0; }
  friend bool operator==(const SparseVertex&, const SparseVertex&) = default;
};

/// Per-sample shifts (y_1..y_n) with average 1-norm within the ball radius;
/// the feasibility slack is 1e-9. A perturbation set induces the discrete
/// worst-case distribution with atoms xi_k - y_k.
class PerturbationSet {
 public:
  PerturbationSet(std::vector<Vector> shifts, double radius);
  static PerturbationSet zeros(Eigen::Index n, Eigen::Index m, double radius);

  Eigen::Index n() const { return static_cast<Eigen::Index>(shifts_.size()); }
  Eigen::Index m() const { return shifts_.empty() ? 0 : shifts_.front().size(); }
  double radius() const { return radius_; }
  const std::vector<Vector>& shifts() const { return shifts_; }
  const Vector& operator[](Eigen::Index k) const {
    return shifts_.at(static_cast<std::size_t>(k));
  }
  double average_l1() const;

 private:
  std::vector<Vector> shifts_;
  double radius_;
};

/// Ordered, duplicate-free candidate vertex set discovered by the linear
/// oracle; the warm-startable state of certificate generation. The origin
/// pseudo-vertex is always present at index 0.
class VertexSet {
 public:
  VertexSet(Eigen::Index n, Eigen::Index m, double scale);

  Eigen::Index n() const { return n_; }
  Eigen::Index m() const { return m_; }
  double scale() const { return scale_; }
  std::size_t size() const { return vertices_.size(); }
  const std::vector<SparseVertex>& vertices() const { return vertices_; }
  bool contains(const SparseVertex& v) const;
  /// Returns false when the vertex is already present.
  bool add(const SparseVertex& v);

 private:
  Eigen::Index n_, m_;
  double scale_;
  std::vector<SparseVertex> vertices_;
  std::set<std::tuple<Eigen::Index, Eigen::Index, int>> seen_;
};

/// Maps a sparse vertex to its perturbation: y_l gets the single nonzero
/// coordinate sign * scale, everything else is zero. The origin maps to all
/// zeros. scale is n times the ball radius.
PerturbationSet decode_vertex(const SparseVertex& v, Eigen::Index n,
                              Eigen::Index m, double scale);

struct LpOracleResult {
  SparseVertex vertex;
  double eta = 0.0;
};

/// Linear oracle over the perturbation simplex: picks the sample/coordinate
/// pair with the largest shift-gradient magnitude (ties: smallest sample,
/// then smallest coordinate), the side by the gradient sign, and returns the
/// linearized improvement eta at the candidate shifts. All-zero gradients
/// yield the origin pseudo-vertex with eta = 0.
LpOracleResult lp_oracle(const CostFunction& cost, const Vector& x,
                         const SampleSet& samples, const PerturbationSet& y,
                         double radius);

/// Average shifted cost (1/n) sum_k f(x, xi_k - y_k); re-scores a worst-case
/// distribution at a new decision.
double certificate_value_at(const CostFunction& cost, const Vector& x,
                            const SampleSet& samples,
                            const PerturbationSet& y);

struct WarmStart {
  PerturbationSet perturbations;
  VertexSet vertices;
};

/// Worst-case certificate for one decision: value, the distribution
/// achieving it, the final linear-oracle gap, and the state needed to warm
/// start later generations.
struct CertificateReport {
  double value = 0.0;
  DiscreteDistribution worst_case;
  double gap = 0.0;
  PerturbationSet perturbations;
  VertexSet vertex_set;
  Eigen::Index n = 0;
  double beta_n = 0.0;
  double radius = 0.0;
  long rounds = 0;  // linear-oracle rounds used by the generation loop
};

std::string to_json_string(const CertificateReport& report);

struct CertificateOptions {
  double eps1 = 0.0;
  double beta_n = 0.0;  // recorded in the report
  /// Polled inside the hull search, once per iteration; a true return
  /// abandons the generation and surfaces the partial state.
  std::function<bool()> interrupt;
  /// Polled once per oracle round; falls back to interrupt when unset.
  std::function<bool()> interrupt_round;
  long afw_max_iters = -1;
};

struct CertificateResult {
  bool completed = false;
  CertificateReport report;
};

/// Grows the candidate vertex set with the linear oracle and maximizes the
/// average shifted cost over its convex hull until the oracle gap falls to
/// eps1. The hull search runs as an away-step Frank-Wolfe minimization of the
/// negated objective over the unit simplex of combination weights. On exit
/// the report value is within eps1 of the exact worst case.
CertificateResult generate_certificate(
    const CostFunction& cost, const Vector& x, const SampleSet& samples,
    double radius, const CertificateOptions& opts,
    const std::optional<WarmStart>& warm = std::nullopt);

}  // namespace dro
