#include "dro/certificate.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "dro/simplex_fw.hpp"

namespace dro {

namespace {

constexpr double kFeasibilitySlack = 1e-9;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

PerturbationSet::PerturbationSet(std::vector<Vector> shifts, double radius)
    : shifts_(std::move(shifts)), radius_(radius) {
  require(!shifts_.empty(), "perturbation set must not be empty");
  require(radius_ >= 0.0, "radius must be nonnegative");
  const Eigen::Index m = shifts_.front().size();
  require(m >= 1, "perturbation dimension must be positive");
  for (const auto& y : shifts_)
    require(y.size() == m, "perturbation dimensions must agree");
  require(average_l1() <= radius_ + kFeasibilitySlack,
          "perturbations exceed the ball radius");
}

PerturbationSet PerturbationSet::zeros(Eigen::Index n, Eigen::Index m,
                                       double radius) {
  require(n >= 1 && m >= 1, "dimensions must be positive");
  return PerturbationSet(std::vector<Vector>(static_cast<std::size_t>(n),
                                             Vector::Zero(m)),
                         radius);
}

double PerturbationSet::average_l1() const {
  double total = 0.0;
  for (const auto& y : shifts_) total += y.template lpNorm<1>();
  return total / static_cast<double>(shifts_.size());
}

VertexSet::VertexSet(Eigen::Index n, Eigen::Index m, double scale)
    : n_(n), m_(m), scale_(scale) {
  require(n >= 1 && m >= 1, "dimensions must be positive");
  require(scale >= 0.0, "scale must be nonnegative");
  vertices_.push_back(SparseVertex::origin());
}

bool VertexSet::contains(const SparseVertex& v) const {
  if (v.is_origin()) return true;
  return seen_.count({v.sample, v.coord, v.sign}) > 0;
}

bool VertexSet::add(const SparseVertex& v) {
  if (v.is_origin()) return false;
  require(v.sample >= 0 && v.sample < n_, "vertex sample index out of range");
  require(v.coord >= 0 && v.coord < m_, "vertex coordinate out of range");
  require(v.sign == 1 || v.sign == -1, "vertex sign must be +1 or -1");
  if (!seen_.insert({v.sample, v.coord, v.sign}).second) return false;
  vertices_.push_back(v);
  return true;
}

PerturbationSet decode_vertex(const SparseVertex& v, Eigen::Index n,
                              Eigen::Index m, double scale) {
  require(n >= 1 && m >= 1, "dimensions must be positive");
  require(scale >= 0.0, "scale must be nonnegative");
  std::vector<Vector> shifts(static_cast<std::size_t>(n), Vector::Zero(m));
  if (!v.is_origin()) {
    require(v.sample >= 0 && v.sample < n, "vertex sample index out of range");
    require(v.coord >= 0 && v.coord < m, "vertex coordinate out of range");
    require(v.sign == 1 || v.sign == -1, "vertex sign must be +1 or -1");
    shifts[static_cast<std::size_t>(v.sample)][v.coord] =
        static_cast<double>(v.sign) * scale;
  }
  return PerturbationSet(std::move(shifts), scale / static_cast<double>(n));
}

namespace {

void check_oracle_inputs(const CostSlice& slice, const SampleSet& samples,
                         const PerturbationSet& y, double radius) {
  require(samples.size() >= 1, "sample set must not be empty");
  require(slice.dim_xi == samples.dim(), "uncertainty dimension mismatch");
  require(y.n() == samples.size(), "one perturbation per sample required");
  require(y.m() == samples.dim(), "perturbation dimension mismatch");
  require(radius >= 0.0, "radius must be nonnegative");
  require(y.average_l1() <= radius + kFeasibilitySlack,
          "perturbations exceed the ball radius");
}

LpOracleResult lp_oracle_impl(const CostSlice& slice, const SampleSet& samples,
                              const PerturbationSet& y, double radius) {
  const Eigen::Index n = samples.size();
  const Eigen::Index m = samples.dim();
  const double scale = static_cast<double>(n) * radius;

  double cross = 0.0;  // sum_k <g_k, y_k>
  double best_abs = 0.0;
  Eigen::Index best_sample = -1, best_coord = -1;
  double best_entry = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Vector g = -slice.grad_xi(samples[k] - y[k]);
    cross += g.dot(y[k]);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double a = std::abs(g[i]);
      if (a > best_abs) {
        best_abs = a;
        best_sample = k;
        best_coord = i;
        best_entry = g[i];
      }
    }
  }

  LpOracleResult res;
  if (best_abs == 0.0) {
    res.vertex = SparseVertex::origin();
    res.eta = -cross / static_cast<double>(n);
    return res;
  }
  res.vertex = SparseVertex{best_sample, best_coord,
                            best_entry > 0.0 ? 1 : -1};
  res.eta = (static_cast<double>(res.vertex.sign) * scale * best_entry -
             cross) /
            static_cast<double>(n);
  return res;
}

double value_at_impl(const CostSlice& slice, const SampleSet& samples,
                     const std::vector<Vector>& shifts) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < samples.size(); ++k)
    total += slice.eval(samples[k] - shifts[static_cast<std::size_t>(k)]);
  return total / static_cast<double>(samples.size());
}

}  // namespace

LpOracleResult lp_oracle(const CostFunction& cost, const Vector& x,
                         const SampleSet& samples, const PerturbationSet& y,
                         double radius) {
  const CostSlice slice = slice_at(cost, x);
  check_oracle_inputs(slice, samples, y, radius);
  return lp_oracle_impl(slice, samples, y, radius);
}

double certificate_value_at(const CostFunction& cost, const Vector& x,
                            const SampleSet& samples,
                            const PerturbationSet& y) {
  const CostSlice slice = slice_at(cost, x);
  require(slice.dim_xi == samples.dim(), "uncertainty dimension mismatch");
  require(y.n() == samples.size(), "one perturbation per sample required");
  require(y.m() == samples.dim(), "perturbation dimension mismatch");
  require(y.average_l1() <= y.radius() + kFeasibilitySlack,
          "perturbations exceed the ball radius");
  return value_at_impl(slice, samples, y.shifts());
}

namespace {

/// Hull search objective: negated average shifted cost as a function of the
/// convex-combination weights gamma over the candidate vertices.
class HullObjective {
 public:
  HullObjective(const CostSlice& slice, const SampleSet& samples,
                const VertexSet& vertices)
      : slice_(slice), samples_(samples), verts_(vertices.vertices()),
        n_(samples.size()), m_(samples.dim()), scale_(vertices.scale()) {
    referenced_.assign(static_cast<std::size_t>(n_), false);
    for (const auto& v : verts_)
      if (!v.is_origin()) referenced_[static_cast<std::size_t>(v.sample)] = true;
    base_unreferenced_ = 0.0;
    for (Eigen::Index k = 0; k < n_; ++k)
      if (!referenced_[static_cast<std::size_t>(k)])
        base_unreferenced_ += slice_.eval(samples_[k]);
  }

  std::vector<Vector> combine(const Eigen::VectorXd& gamma) const {
    std::vector<Vector> shifts(static_cast<std::size_t>(n_), Vector::Zero(m_));
    for (std::size_t i = 0; i < verts_.size(); ++i) {
      const auto& v = verts_[i];
      if (v.is_origin()) continue;
      const double g = gamma[static_cast<Eigen::Index>(i)];
      if (g == 0.0) continue;
      shifts[static_cast<std::size_t>(v.sample)][v.coord] +=
          g * static_cast<double>(v.sign) * scale_;
    }
    return shifts;
  }

  fw::SmoothObjective<double> as_objective() const {
    fw::SmoothObjective<double> obj;
    obj.quadratic_along_lines = slice_.quadratic_in_xi;
    obj.eval = [this](const Eigen::VectorXd& gamma) {
      const auto shifts = combine(gamma);
      double total = base_unreferenced_;
      for (Eigen::Index k = 0; k < n_; ++k)
        if (referenced_[static_cast<std::size_t>(k)])
          total += slice_.eval(samples_[k] - shifts[static_cast<std::size_t>(k)]);
      return -total / static_cast<double>(n_);
    };
    obj.grad = [this](const Eigen::VectorXd& gamma) {
      const auto shifts = combine(gamma);
      // Shift gradients per referenced sample, shared across vertices.
      std::vector<Vector> gk(static_cast<std::size_t>(n_));
      for (Eigen::Index k = 0; k < n_; ++k)
        if (referenced_[static_cast<std::size_t>(k)])
          gk[static_cast<std::size_t>(k)] = -slice_.grad_xi(
              samples_[k] - shifts[static_cast<std::size_t>(k)]);
      Eigen::VectorXd out =
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(verts_.size()));
      for (std::size_t i = 0; i < verts_.size(); ++i) {
        const auto& v = verts_[i];
        if (v.is_origin()) continue;
        const double entry =
            gk[static_cast<std::size_t>(v.sample)][v.coord];
        out[static_cast<Eigen::Index>(i)] =
            -(entry * static_cast<double>(v.sign) * scale_) /
            static_cast<double>(n_);
      }
      return out;
    };
    return obj;
  }

 private:
  const CostSlice& slice_;
  const SampleSet& samples_;
  const std::vector<SparseVertex>& verts_;
  Eigen::Index n_, m_;
  double scale_;
  std::vector<bool> referenced_;
  double base_unreferenced_;
};

}  // namespace

CertificateResult generate_certificate(const CostFunction& cost,
                                       const Vector& x,
                                       const SampleSet& samples, double radius,
                                       const CertificateOptions& opts,
                                       const std::optional<WarmStart>& warm) {
  require(opts.eps1 > 0.0, "eps1 must be positive");
  require(samples.size() >= 1, "sample set must not be empty");
  require(radius >= 0.0, "radius must be nonnegative");
  const Eigen::Index n = samples.size();
  const Eigen::Index m = samples.dim();
  const double scale = static_cast<double>(n) * radius;
  const CostSlice slice = slice_at(cost, x);
  require(slice.dim_xi == m, "uncertainty dimension mismatch");

  PerturbationSet y = warm ? warm->perturbations
                           : PerturbationSet::zeros(n, m, radius);
  VertexSet vertices = warm ? warm->vertices : VertexSet(n, m, scale);
  if (warm) {
    require(y.n() == n && y.m() == m, "warm perturbations have wrong shape");
    require(std::abs(y.radius() - radius) <=
                1e-9 * std::max(1.0, radius),
            "warm perturbations built for a different radius");
    require(vertices.n() == n && vertices.m() == m,
            "warm vertex set has wrong shape");
    require(std::abs(vertices.scale() - scale) <=
                1e-9 * std::max(1.0, scale),
            "warm vertex set built for a different scale");
  }

  double gap = std::numeric_limits<double>::infinity();
  long rounds = 0;
  bool interrupted = false;
  bool converged = false;
  int escalations = 0;
  std::optional<fw::ActiveIterate<double>> hull_start;

  const auto& round_poll =
      opts.interrupt_round ? opts.interrupt_round : opts.interrupt;
  const long max_rounds = 4 * m * n + 64;
  while (rounds < max_rounds) {
    if (round_poll && round_poll()) {
      interrupted = true;
      break;
    }
    const LpOracleResult lp = lp_oracle_impl(slice, samples, y, radius);
    gap = lp.eta;
    if (gap <= opts.eps1) {
      converged = true;
      break;
    }
    ++rounds;
    if (vertices.add(lp.vertex)) {
      escalations = 0;
    } else {
      // The oracle can revisit a vertex only when the hull search stopped
      // short of its gap target; give it a larger budget and retry.
      if (++escalations > 6)
        throw std::runtime_error(
            "certificate generation stalled: vertex budget exhausted without "
            "reaching the gap target");
    }

    const auto T = static_cast<Eigen::Index>(vertices.size());
    const fw::ScaledSimplex<double> weights_simplex(T, 1.0);
    HullObjective hull(slice, samples, vertices);
    const auto objective = hull.as_objective();
    if (hull_start && hull_start->point.size() < T) {
      const Eigen::Index old = hull_start->point.size();
      hull_start->point.conservativeResize(T);
      hull_start->point.tail(T - old).setZero();
    }
    fw::AfwOptions<double> afw_opts;
    afw_opts.max_iters =
        opts.afw_max_iters >= 0 ? opts.afw_max_iters : (10 * T + 1000);
    afw_opts.max_iters <<= std::min(escalations, 6);
    afw_opts.interrupt = opts.interrupt;
    const auto cp = fw::afw_minimize<double>(objective, weights_simplex,
                                             opts.eps1, hull_start, afw_opts);
    y = PerturbationSet(hull.combine(cp.iterate.point), radius);
    hull_start = cp.iterate;
    if (cp.interrupted) {
      interrupted = true;
      break;
    }
  }
  if (!interrupted && !converged)
    throw std::runtime_error(
        "certificate generation stalled: round budget exhausted without "
        "reaching the gap target");

  CertificateReport report{
      .value = value_at_impl(slice, samples, y.shifts()),
      .worst_case = {},
      .gap = gap,
      .perturbations = y,
      .vertex_set = vertices,
      .n = n,
      .beta_n = opts.beta_n,
      .radius = radius,
      .rounds = rounds,
  };
  report.worst_case.atoms.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k)
    report.worst_case.atoms.push_back(samples[k] - y[k]);
  report.worst_case.weights =
      Vector::Constant(n, 1.0 / static_cast<double>(n));

  return CertificateResult{!interrupted, std::move(report)};
}

std::string to_json_string(const CertificateReport& report) {
  nlohmann::ordered_json j;
  j["value"] = report.value;
  j["gap"] = report.gap;
  j["n"] = report.n;
  j["beta_n"] = report.beta_n;
  j["radius"] = report.radius;
  j["atoms"] = nlohmann::json::array();
  for (const auto& a : report.worst_case.atoms)
    j["atoms"].push_back(std::vector<double>(a.data(), a.data() + a.size()));
  j["weights"] = std::vector<double>(
      report.worst_case.weights.data(),
      report.worst_case.weights.data() + report.worst_case.weights.size());
  return j.dump();
}

}  // namespace dro
