#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <type_traits>
#include <vector>

namespace dro::fw {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// The scaled probability simplex {v >= 0, sum v = scale}. Vertices are
/// scale * e_j, so index plus scale is enough; scaled vertices are never
/// materialized as a set.
template <typename Scalar>
struct ScaledSimplex {
  Eigen::Index dim;
  Scalar scale;

  ScaledSimplex(Eigen::Index dim_in, Scalar scale_in)
      : dim(dim_in), scale(scale_in) {
    if (dim < 1) throw std::invalid_argument("simplex dimension must be positive");
    if (!(scale > Scalar(0))) throw std::invalid_argument("simplex scale must be positive");
  }

  Vec<Scalar> vertex(Eigen::Index j) const {
    Vec<Scalar> v = Vec<Scalar>::Zero(dim);
    v[j] = scale;
    return v;
  }

  bool contains(const Vec<Scalar>& v, Scalar tol = Scalar(1e-9)) const {
    if (v.size() != dim) return false;
    if (v.minCoeff() < -tol * scale) return false;
    using std::abs;
    return abs(v.sum() - scale) <= tol * scale;
  }
};

/// Differentiable objective over a simplex. When the objective is quadratic
/// along every line, line searches are solved in closed form.
template <typename Scalar>
struct SmoothObjective {
  std::function<Scalar(const Vec<Scalar>&)> eval;
  std::function<Vec<Scalar>(const Vec<Scalar>&)> grad;
  bool quadratic_along_lines = false;
};

enum class SearchSense { minimize, maximize };

/// Index of the extreme point scale*e_j optimizing the linearized objective
/// <grad, v - x> over the simplex vertices. The -<grad, x> term is constant
/// across vertices, so only the coefficients matter. Ties break to the
/// lowest index.
template <typename Scalar>
Eigen::Index fw_search_vertex(const Vec<std::type_identity_t<Scalar>>& gradient,
                              const ScaledSimplex<Scalar>& simplex,
                              SearchSense sense) {
  if (gradient.size() != simplex.dim)
    throw std::invalid_argument("gradient dimension mismatch");
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < simplex.dim; ++j) {
    if (sense == SearchSense::minimize ? gradient[j] < gradient[best]
                                       : gradient[j] > gradient[best])
      best = j;
  }
  return best;
}

template <typename Scalar>
Eigen::Index fw_search_vertex(const SmoothObjective<Scalar>& obj,
                              const Vec<Scalar>& x,
                              const ScaledSimplex<Scalar>& simplex,
                              SearchSense sense) {
  return fw_search_vertex<Scalar>(obj.grad(x), simplex, sense);
}

/// Step length in [0, gamma_max] minimizing obj along x + gamma*d. Exact for
/// objectives quadratic along lines; golden section with a 200-evaluation cap
/// otherwise. Ties (a flat objective) resolve to the smallest minimizer.
/// dphi0, when supplied, is the known directional derivative <grad(x), d>.
template <typename Scalar>
Scalar line_search(const SmoothObjective<Scalar>& obj,
                   const Vec<std::type_identity_t<Scalar>>& x,
                   const Vec<std::type_identity_t<Scalar>>& d,
                   std::type_identity_t<Scalar> gamma_max,
                   std::optional<std::type_identity_t<Scalar>> dphi0 =
                       std::nullopt) {
  if (!(gamma_max > Scalar(0)))
    throw std::invalid_argument("gamma_max must be positive");
  using std::abs;
  const auto phi = [&](Scalar g) { return obj.eval(x + g * d); };

  if (obj.quadratic_along_lines) {
    const Scalar p0 = phi(Scalar(0));
    const Scalar dp0 = dphi0 ? *dphi0 : Scalar(obj.grad(x).dot(d));
    const Scalar pm = phi(gamma_max);
    // phi(g) = p0 + dp0*g + 0.5*q*g^2 exactly.
    const Scalar q =
        Scalar(2) * (pm - p0 - dp0 * gamma_max) / (gamma_max * gamma_max);
    const Scalar tiny = Scalar(1e-14) * (abs(p0) + abs(pm) + Scalar(1));
    if (q > tiny) {
      Scalar g = -dp0 / q;
      if (g < Scalar(0)) g = Scalar(0);
      if (g > gamma_max) g = gamma_max;
      return g;
    }
    // Linear (or numerically flat) along d: endpoint by slope, 0 on ties.
    if (pm < p0) return gamma_max;
    return Scalar(0);
  }

  // Golden-section search; candidate endpoints are compared afterwards so a
  // monotone objective returns the boundary and a flat one returns 0.
  const Scalar inv_phi = Scalar(0.6180339887498948482);
  Scalar lo = Scalar(0), hi = gamma_max;
  Scalar g1 = hi - inv_phi * (hi - lo);
  Scalar g2 = lo + inv_phi * (hi - lo);
  Scalar f1 = phi(g1), f2 = phi(g2);
  int evals = 2;
  const Scalar tol = Scalar(1e-12) * std::max(Scalar(1), gamma_max);
  while (evals < 200 && (hi - lo) > tol) {
    if (f1 <= f2) {
      hi = g2;
      g2 = g1;
      f2 = f1;
      g1 = hi - inv_phi * (hi - lo);
      f1 = phi(g1);
    } else {
      lo = g1;
      g1 = g2;
      f1 = f2;
      g2 = lo + inv_phi * (hi - lo);
      f2 = phi(g2);
    }
    ++evals;
  }
  const Scalar interior = (f1 <= f2) ? g1 : g2;
  const Scalar f_int = (f1 <= f2) ? f1 : f2;
  const Scalar f_zero = phi(Scalar(0));
  const Scalar f_max = phi(gamma_max);
  // Smallest gamma among the tied minimizers.
  Scalar best_g = Scalar(0);
  Scalar best_f = f_zero;
  if (f_int < best_f) {
    best_f = f_int;
    best_g = interior;
  }
  if (f_max < best_f) {
    best_f = f_max;
    best_g = gamma_max;
  }
  return best_g;
}

/// Iterate with its active-vertex decomposition: point = scale * sum of
/// alpha_v e_v with the alphas on the unit simplex. Vertices whose weight
/// falls below the floor are dropped so floating-point residue cannot grow
/// the active set without bound.
template <typename Scalar>
struct ActiveIterate {
  Vec<Scalar> point;
  std::map<Eigen::Index, Scalar> alphas;

  static ActiveIterate at_vertex(const ScaledSimplex<Scalar>& simplex,
                                 Eigen::Index j) {
    ActiveIterate it;
    it.alphas[j] = Scalar(1);
    it.point = simplex.vertex(j);
    return it;
  }

  Scalar weight_sum() const {
    Scalar s = 0;
    for (const auto& [v, a] : alphas) s += a;
    return s;
  }

  void rebuild_point(const ScaledSimplex<Scalar>& simplex) {
    point = Vec<Scalar>::Zero(simplex.dim);
    for (const auto& [v, a] : alphas) point[v] = simplex.scale * a;
  }
};

enum class AfwStepKind { fw, fw_full, away, drop };

template <typename Scalar>
struct AfwTraceEntry {
  Scalar value;
  Scalar gap;
  AfwStepKind kind;
  Scalar gamma;
  Scalar gamma_max;
};

template <typename Scalar>
struct AfwOptions {
  long max_iters = -1;  // < 0 means 10*dim + 1000
  Scalar weight_floor = Scalar(1e-12);
  std::function<bool()> interrupt;  // polled once per iteration
  std::vector<AfwTraceEntry<Scalar>>* trace = nullptr;
};

template <typename Scalar>
struct AfwResult {
  ActiveIterate<Scalar> iterate;
  Scalar value = Scalar(0);
  Scalar gap = Scalar(0);
  bool converged = false;
  bool interrupted = false;
  long iterations = 0;
  long drop_steps = 0;
};

/// Away-step Frank-Wolfe over a scaled simplex: at each iteration the better
/// of the Frank-Wolfe direction and the away direction is taken, with the
/// away step capped at gamma_max = alpha_v/(1 - alpha_v) and the vertex
/// dropped when the cap binds. Terminates when the Frank-Wolfe gap falls to
/// eps, or returns the current iterate flagged as not converged once the
/// iteration budget is spent.
template <typename Scalar>
AfwResult<Scalar> afw_minimize(
    const SmoothObjective<Scalar>& obj, const ScaledSimplex<Scalar>& simplex,
    std::type_identity_t<Scalar> eps,
    std::optional<ActiveIterate<std::type_identity_t<Scalar>>> start =
        std::nullopt,
    const AfwOptions<std::type_identity_t<Scalar>>& opts = {}) {
  if (!(eps > Scalar(0))) throw std::invalid_argument("eps must be positive");
  using std::abs;

  AfwResult<Scalar> res;
  ActiveIterate<Scalar>& it = res.iterate;
  if (start) {
    it = std::move(*start);
    if (!simplex.contains(it.point) ||
        abs(it.weight_sum() - Scalar(1)) > Scalar(1e-9))
      throw std::invalid_argument("start iterate is not feasible");
  } else {
    it = ActiveIterate<Scalar>::at_vertex(simplex, 0);
  }

  const long max_iters =
      opts.max_iters >= 0 ? opts.max_iters : 10 * simplex.dim + 1000;

  Scalar gap = std::numeric_limits<Scalar>::infinity();
  for (long k = 0; k < max_iters; ++k) {
    if (opts.interrupt && opts.interrupt()) {
      res.interrupted = true;
      break;
    }
    const Vec<Scalar> g = obj.grad(it.point);

    const Eigen::Index s_idx =
        fw_search_vertex<Scalar>(g, simplex, SearchSense::minimize);
    const Vec<Scalar> d_fw = simplex.vertex(s_idx) - it.point;
    gap = -g.dot(d_fw);
    if (opts.trace)
      opts.trace->push_back({obj.eval(it.point), gap, AfwStepKind::fw,
                             Scalar(0), Scalar(0)});
    if (gap <= eps) {
      res.converged = true;
      break;
    }

    // Away vertex: the active vertex whose removal locally helps the most.
    Eigen::Index v_idx = it.alphas.begin()->first;
    for (const auto& [v, a] : it.alphas)
      if (g[v] > g[v_idx]) v_idx = v;
    const Vec<Scalar> d_away = it.point - simplex.vertex(v_idx);

    const Scalar fw_descent = -g.dot(d_fw);
    const Scalar away_descent = -g.dot(d_away);

    bool is_fw = fw_descent >= away_descent;
    Vec<Scalar> d;
    Scalar gamma_max;
    if (is_fw) {
      d = d_fw;
      gamma_max = Scalar(1);
    } else {
      const Scalar alpha_v = it.alphas.at(v_idx);
      d = d_away;
      gamma_max = alpha_v / (Scalar(1) - alpha_v);
    }

    Scalar gamma = line_search<Scalar>(obj, it.point, d, gamma_max, g.dot(d));
    // Snap to the boundary so drop and full steps are classified exactly.
    if (gamma > gamma_max * (Scalar(1) - Scalar(1e-12))) gamma = gamma_max;

    if (is_fw) {
      if (gamma == Scalar(1)) {
        it.alphas.clear();
        it.alphas[s_idx] = Scalar(1);
        if (opts.trace) opts.trace->back().kind = AfwStepKind::fw_full;
      } else {
        for (auto& [v, a] : it.alphas) a *= (Scalar(1) - gamma);
        it.alphas[s_idx] += gamma;
        if (opts.trace) opts.trace->back().kind = AfwStepKind::fw;
      }
    } else {
      const bool drop = (gamma == gamma_max);
      for (auto& [v, a] : it.alphas) a *= (Scalar(1) + gamma);
      it.alphas[v_idx] -= gamma;
      if (drop) {
        it.alphas.erase(v_idx);
        ++res.drop_steps;
        if (opts.trace) opts.trace->back().kind = AfwStepKind::drop;
      } else if (opts.trace) {
        opts.trace->back().kind = AfwStepKind::away;
      }
    }
    if (opts.trace) {
      opts.trace->back().gamma = gamma;
      opts.trace->back().gamma_max = gamma_max;
    }

    // Weight hygiene: drop floating-point residue and renormalize.
    for (auto i = it.alphas.begin(); i != it.alphas.end();) {
      if (i->second < opts.weight_floor)
        i = it.alphas.erase(i);
      else
        ++i;
    }
    const Scalar total = it.weight_sum();
    for (auto& [v, a] : it.alphas) a /= total;
    it.rebuild_point(simplex);

    ++res.iterations;
  }

  res.gap = gap;
  res.value = obj.eval(it.point);
  return res;
}

}  // namespace dro::fw
