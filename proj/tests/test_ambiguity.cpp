#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dro/ambiguity.hpp"

using dro::Vector;

TEST_CASE("empirical distribution puts weight 1/n on each sample") {
  dro::SampleSet s(2);
  Vector a(2);
  a << 1.0, 2.0;
  s.append(a);
  auto d = dro::empirical_distribution(s);
  CHECK(d.atoms.size() == 1);
  CHECK(d.weights[0] == doctest::Approx(1.0));
  CHECK(d.atoms[0][1] == doctest::Approx(2.0));

  dro::SampleSet t(1);
  t.append(Vector::Zero(1));
  t.append(Vector::Constant(1, 4.0));
  d = dro::empirical_distribution(t);
  CHECK(d.weights[0] == doctest::Approx(0.5));
  CHECK(d.weights[1] == doctest::Approx(0.5));

  dro::SampleSet u(1);
  for (int k = 0; k < 50; ++k) u.append(Vector::Constant(1, k));
  d = dro::empirical_distribution(u);
  for (int k = 0; k < 50; ++k) CHECK(d.weights[k] == 1.0 / 50.0);
  CHECK(d.weights.sum() == doctest::Approx(1.0));
  CHECK(d.is_normalized());

  dro::SampleSet empty(1);
  CHECK_THROWS_AS(dro::empirical_distribution(empty), std::invalid_argument);
}

TEST_CASE("sample sets are append-only with fixed dimension") {
  dro::SampleSet s(2);
  s.append(Vector::Zero(2));
  CHECK_THROWS_AS(s.append(Vector::Zero(3)), std::invalid_argument);
  CHECK(s.size() == 1);
}

TEST_CASE("radius branch boundary is continuous") {
  // c1=2, c2=1, beta=2/e makes L=1: both branches give 1 at n=1.
  const dro::RadiusParams p(2.0, 1.0, 2.0, 10);
  const double beta = 2.0 / std::exp(1.0);
  CHECK(dro::wasserstein_radius(p, 1, beta) == doctest::Approx(1.0));
}

TEST_CASE("radius closed forms") {
  const dro::RadiusParams p(2.0, 1.0, 2.0, 10);
  // L = log(2/0.95) = 0.744440474947496 <= 1: small-radius branch, 1/m root.
  CHECK(dro::wasserstein_radius(p, 1, 0.95) ==
        doctest::Approx(0.9709189951595160).epsilon(1e-12));
  // L = log(10) = 2.302585092994046 > 1: tail branch, 1/a root.
  CHECK(dro::wasserstein_radius(p, 1, 0.2) ==
        doctest::Approx(1.5174271293851464).epsilon(1e-12));
}

TEST_CASE("radius rejects invalid confidence levels") {
  const dro::RadiusParams p(0.5, 1.0, 2.0, 3);
  CHECK_THROWS_AS(dro::wasserstein_radius(p, 1, 0.7), std::invalid_argument);
  CHECK_THROWS_AS(dro::wasserstein_radius(p, 1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(dro::wasserstein_radius(p, 0, 0.1), std::invalid_argument);
}

TEST_CASE("dimension two is rejected outright") {
  CHECK_THROWS_AS(dro::RadiusParams(2.0, 1.0, 2.0, 2), std::invalid_argument);
  CHECK_NOTHROW(dro::RadiusParams(2.0, 1.0, 2.0, 1));
  CHECK_NOTHROW(dro::RadiusParams(2.0, 1.0, 2.0, 3));
}

TEST_CASE("radius parameter validation") {
  CHECK_THROWS_AS(dro::RadiusParams(0.0, 1.0, 2.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(dro::RadiusParams(2.0, -1.0, 2.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(dro::RadiusParams(2.0, 1.0, 1.0, 3), std::invalid_argument);
}

TEST_CASE("built-in confidence schedule") {
  CHECK(dro::default_beta(1) == doctest::Approx(0.95));
  CHECK(dro::default_beta(4) ==
        doctest::Approx(0.3494854691128702).epsilon(1e-12));
  // Monotone to zero.
  double prev = 1.0;
  for (long n = 1; n <= 2000; n *= 2) {
    const double b = dro::default_beta(n);
    CHECK(b < prev);
    prev = b;
  }
  CHECK(dro::default_beta(1 << 20) < 1e-300);
}

TEST_CASE("schedule wrapper validates range and monotonicity") {
  auto s = dro::ReliabilitySchedule::default_schedule();
  CHECK_NOTHROW(s.check_monotone(5000));
  CHECK(s(1) == doctest::Approx(0.95));
  CHECK_THROWS_AS(s(0), std::invalid_argument);

  dro::ReliabilitySchedule flat([](long) { return 0.5; });
  CHECK_THROWS_AS(flat.check_monotone(3), std::invalid_argument);
  dro::ReliabilitySchedule outside([](long) { return 1.5; });
  CHECK_THROWS_AS(outside(1), std::invalid_argument);
}

TEST_CASE("radius is non-increasing over the run horizon") {
  // The reference configuration: c1=2, c2=1, a=2, m=10 under the built-in
  // schedule, swept over n in [1, 1e4].
  const dro::RadiusParams p(2.0, 1.0, 2.0, 10);
  double prev = std::numeric_limits<double>::infinity();
  for (long n = 1; n <= 10000; ++n) {
    const double r = dro::wasserstein_radius(p, n, dro::default_beta(n));
    CHECK(r <= prev + 1e-15);
    CHECK(static_cast<double>(n) * r > 0.0);
    prev = r;
  }
}

TEST_CASE("samples round trip through json lines") {
  std::vector<Vector> xs;
  Vector a(2), b(2);
  a << 1.5, -2.0;
  b << 0.0, 3.25;
  xs.push_back(a);
  xs.push_back(b);
  std::ostringstream out;
  dro::write_samples_jsonl(out, xs);
  std::istringstream in(out.str());
  const auto back = dro::read_samples_jsonl(in, 2);
  REQUIRE(back.size() == 2);
  CHECK((back[0] - a).norm() == doctest::Approx(0.0));
  CHECK((back[1] - b).norm() == doctest::Approx(0.0));

  std::istringstream bad("{\"n\": 2, \"xi\": [1.0, 2.0]}");
  CHECK_THROWS_AS(dro::read_samples_jsonl(bad, 2), std::invalid_argument);
}
