#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dro/rng.hpp"
#include "dro/simplex_fw.hpp"

using dro::fw::ActiveIterate;
using dro::fw::AfwOptions;
using dro::fw::ScaledSimplex;
using dro::fw::SearchSense;
using dro::fw::SmoothObjective;
using Vec = Eigen::VectorXd;

namespace {

SmoothObjective<double> distance_squared(const Vec& target) {
  SmoothObjective<double> obj;
  obj.quadratic_along_lines = true;
  obj.eval = [target](const Vec& v) { return (v - target).squaredNorm(); };
  obj.grad = [target](const Vec& v) { return Vec(2.0 * (v - target)); };
  return obj;
}

SmoothObjective<double> linear(const Vec& c) {
  SmoothObjective<double> obj;
  obj.quadratic_along_lines = true;
  obj.eval = [c](const Vec& v) { return c.dot(v); };
  obj.grad = [c](const Vec& v) {
    (void)v;
    return c;
  };
  return obj;
}

/// Euclidean projection onto {v >= 0, sum v = s}: the independent optimum
/// for the distance-squared test problems (sort-based waterfilling).
Vec project_to_simplex(const Vec& c, double s) {
  std::vector<double> u(c.data(), c.data() + c.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, tau = 0.0;
  int rho = 0;
  for (int i = 0; i < static_cast<int>(u.size()); ++i) {
    cum += u[static_cast<std::size_t>(i)];
    const double t = (cum - s) / static_cast<double>(i + 1);
    if (u[static_cast<std::size_t>(i)] - t > 0.0) {
      rho = i + 1;
      tau = t;
    }
  }
  (void)rho;
  Vec out = (c.array() - tau).cwiseMax(0.0);
  return out;
}

}  // namespace

TEST_CASE("search vertex optimizes the linearization with low-index ties") {
  const ScaledSimplex<double> unit(2, 1.0);
  Vec g(2);
  g << 1.6, -1.6;
  CHECK(dro::fw::fw_search_vertex(g, unit, SearchSense::minimize) == 1);
  CHECK(dro::fw::fw_search_vertex(Vec::Zero(2), unit,
                                  SearchSense::minimize) == 0);
  Vec h(2);
  h << 3.0, -5.0;
  CHECK(dro::fw::fw_search_vertex(h, unit, SearchSense::maximize) == 0);

  // The objective overload matches the gradient overload.
  const auto obj = linear(h);
  Vec x = Vec::Constant(2, 0.5);
  CHECK(dro::fw::fw_search_vertex(obj, x, unit, SearchSense::minimize) == 1);
}

TEST_CASE("line search closed form on quadratics") {
  Vec x(2), c(2);
  x << 0.0, 0.0;
  c << 0.3, 0.0;
  Vec d(2);
  d << 1.0, 0.0;
  const auto obj = distance_squared(c);
  // Interior minimizer at <c - x, d>/||d||^2 = 0.3.
  CHECK(dro::fw::line_search(obj, x, d, 1.0) == doctest::Approx(0.3));
  // Clipped at the cap.
  CHECK(dro::fw::line_search(obj, x, d, 0.2) == doctest::Approx(0.2));

  // Monotone along the direction: the boundary wins.
  Vec far(2);
  far << 10.0, 0.0;
  const auto mono = distance_squared(far);
  CHECK(dro::fw::line_search(mono, x, d, 1.0) == doctest::Approx(1.0));

  // Constant along the direction: smallest minimizer.
  Vec dperp(2);
  dperp << 0.0, 1.0;
  Vec c2(2);
  c2 << 0.5, 0.0;
  SmoothObjective<double> slab;
  slab.quadratic_along_lines = true;
  slab.eval = [](const Vec& v) { return (v[0] - 0.5) * (v[0] - 0.5); };
  slab.grad = [](const Vec& v) {
    Vec g(2);
    g << 2.0 * (v[0] - 0.5), 0.0;
    return g;
  };
  CHECK(dro::fw::line_search(slab, x, dperp, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("golden section handles non-quadratic objectives") {
  SmoothObjective<double> quartic;
  quartic.quadratic_along_lines = false;
  quartic.eval = [](const Vec& v) { return std::pow(v[0] - 0.4, 4.0); };
  quartic.grad = [](const Vec& v) {
    Vec g(1);
    g << 4.0 * std::pow(v[0] - 0.4, 3.0);
    return g;
  };
  Vec x(1), d(1);
  x << 0.0;
  d << 1.0;
  CHECK(dro::fw::line_search(quartic, x, d, 1.0) ==
        doctest::Approx(0.4).epsilon(1e-8));

  SmoothObjective<double> constant;
  constant.quadratic_along_lines = false;
  constant.eval = [](const Vec&) { return 3.0; };
  constant.grad = [](const Vec& v) { return Vec(Vec::Zero(v.size())); };
  CHECK(dro::fw::line_search(constant, x, d, 1.0) == 0.0);
}

TEST_CASE("afw solves the spec problems") {
  Vec inside(2);
  inside << 0.2, 0.8;
  const ScaledSimplex<double> unit2(2, 1.0);
  auto r = dro::fw::afw_minimize(distance_squared(inside), unit2, 1e-8);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(0.0).epsilon(1e-6));
  CHECK((r.iterate.point - inside).norm() < 1e-4);

  Vec c(3);
  c << 1.0, 2.0, 3.0;
  const ScaledSimplex<double> unit3(3, 1.0);
  r = dro::fw::afw_minimize(linear(c), unit3, 1e-10);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(1.0));
  CHECK(r.iterate.point[0] == doctest::Approx(1.0));

  Vec outside(2);
  outside << 2.0, 0.0;
  r = dro::fw::afw_minimize(distance_squared(outside), unit2, 1e-10);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(1.0));
  CHECK(r.iterate.point[0] == doctest::Approx(1.0));
}

TEST_CASE("afw respects warm starts and budgets") {
  const ScaledSimplex<double> unit(4, 1.0);
  Vec target(4);
  target << 0.4, 0.3, 0.2, 0.1;
  const auto obj = distance_squared(target);

  AfwOptions<double> opts;
  opts.max_iters = 1;
  auto r = dro::fw::afw_minimize(obj, unit, 1e-12, std::nullopt, opts);
  CHECK_FALSE(r.converged);

  auto full = dro::fw::afw_minimize(obj, unit, 1e-12);
  CHECK(full.converged);
  // Restarting from the solution converges immediately.
  auto again = dro::fw::afw_minimize(obj, unit, 1e-12, full.iterate);
  CHECK(again.converged);
  CHECK(again.iterations == 0);

  ActiveIterate<double> bad;
  bad.alphas[0] = 1.0;
  bad.point = Vec::Constant(4, 0.25);  // inconsistent with alphas
  CHECK_THROWS_AS(
      dro::fw::afw_minimize(obj, unit, 1e-8, bad),
      std::invalid_argument);
}

TEST_CASE("afw iterates stay feasible with monotone descent and bounded drops") {
  dro::Rng rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::Index dim = 2 + static_cast<Eigen::Index>(rng.raw() % 40);
    const double scale = rng.uniform(0.25, 4.0);
    const ScaledSimplex<double> simplex(dim, scale);
    Vec target(dim);
    for (Eigen::Index i = 0; i < dim; ++i) target[i] = 2.0 * rng.normal();
    const auto obj = distance_squared(target);

    std::vector<dro::fw::AfwTraceEntry<double>> trace;
    AfwOptions<double> opts;
    opts.trace = &trace;
    const auto r = dro::fw::afw_minimize(obj, simplex, 1e-9, std::nullopt,
                                         opts);
    CHECK(r.converged);
    CHECK(simplex.contains(r.iterate.point));
    CHECK(r.iterate.weight_sum() == doctest::Approx(1.0));
    for (const auto& [v, a] : r.iterate.alphas) {
      (void)v;
      CHECK(a > 1e-12);
    }

    long drops = 0;
    for (std::size_t k = 1; k < trace.size(); ++k) {
      CHECK(trace[k].value <= trace[k - 1].value + 1e-12);
      if (trace[k - 1].kind == dro::fw::AfwStepKind::drop) ++drops;
      // Drop steps up to iteration k stay within ceil(k/2).
      CHECK(drops <= static_cast<long>((k + 1) / 2));
    }

    // Gap soundness against the analytic optimum.
    const Vec star = project_to_simplex(target, scale);
    CHECK(r.value - obj.eval(star) <= r.gap + 1e-12);
  }
}

TEST_CASE("geometric decrease on strongly convex quadratics with interior optimum") {
  dro::Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Index dim = 5;
    Vec target(dim);
    for (Eigen::Index i = 0; i < dim; ++i) target[i] = rng.uniform(0.1, 0.3);
    target *= 1.0 / target.sum();  // interior point of the unit simplex
    const ScaledSimplex<double> unit(dim, 1.0);
    const auto obj = distance_squared(target);

    std::vector<dro::fw::AfwTraceEntry<double>> trace;
    AfwOptions<double> opts;
    opts.trace = &trace;
    const auto r = dro::fw::afw_minimize(obj, unit, 1e-12, std::nullopt, opts);
    CHECK(r.converged);
    const double fstar = 0.0;
    double worst_ratio = 0.0;
    for (std::size_t k = 0; k + 1 < trace.size(); ++k) {
      if (trace[k].kind == dro::fw::AfwStepKind::drop) continue;
      const double before = trace[k].value - fstar;
      const double after = trace[k + 1].value - fstar;
      if (before < 1e-10) break;
      worst_ratio = std::max(worst_ratio, after / before);
    }
    CHECK(worst_ratio < 1.0);
  }
}

TEST_CASE("interrupt aborts without losing feasibility") {
  const ScaledSimplex<double> unit(6, 1.0);
  Vec target = Vec::Constant(6, 10.0);
  target[2] = -10.0;
  AfwOptions<double> opts;
  int polls = 0;
  opts.interrupt = [&polls] { return ++polls > 3; };
  const auto r =
      dro::fw::afw_minimize(distance_squared(target), unit, 1e-12,
                            std::nullopt, opts);
  CHECK(r.interrupted);
  CHECK(unit.contains(r.iterate.point));
}
