#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dro/cost.hpp"
#include "dro/rng.hpp"

using dro::Matrix;
using dro::Vector;

namespace {

Vector vec1(double a) {
  Vector v(1);
  v << a;
  return v;
}

dro::QuadraticCost tiny_quadratic() {
  Matrix A(1, 1), B(1, 1), C(1, 1);
  A << 1.0;
  B << 1.0;
  C << -1.0;
  return dro::QuadraticCost(A, B, C);
}

}  // namespace

TEST_CASE("shifted cost evaluates f(x, xi - y)") {
  const auto cost = tiny_quadratic().as_cost();
  CHECK(dro::shifted_cost(cost, vec1(2), vec1(1), vec1(0)) ==
        doctest::Approx(5.0));
  CHECK(dro::shifted_cost(cost, vec1(2), vec1(1), vec1(1)) ==
        doctest::Approx(4.0));

  // x = 0, C = -I, y = xi: every term vanishes.
  Matrix A = Matrix::Identity(2, 2), B = Matrix::Zero(2, 3),
         C = -Matrix::Identity(3, 3);
  const auto cost2 = dro::QuadraticCost(A, B, C).as_cost();
  Vector xi(3);
  xi << 0.3, -1.2, 4.0;
  CHECK(dro::shifted_cost(cost2, Vector::Zero(2), xi, xi) ==
        doctest::Approx(0.0));
}

TEST_CASE("shifted cost rejects mismatched dimensions") {
  const auto cost = tiny_quadratic().as_cost();
  Vector bad(2);
  bad << 1.0, 2.0;
  CHECK_THROWS_AS(dro::shifted_cost(cost, bad, vec1(1), vec1(0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(dro::shifted_cost(cost, vec1(1), bad, vec1(0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(dro::shifted_cost_grad_y(cost, vec1(1), vec1(1), bad),
                  std::invalid_argument);
}

TEST_CASE("shift gradient differentiates through the perturbation") {
  const auto cost = tiny_quadratic().as_cost();
  CHECK(dro::shifted_cost_grad_y(cost, vec1(2), vec1(1), vec1(0))[0] ==
        doctest::Approx(0.0));
  CHECK(dro::shifted_cost_grad_y(cost, vec1(2), vec1(1), vec1(1))[0] ==
        doctest::Approx(-2.0));

  // B = 0, C = -I, y = xi: gradient at the maximizer of the centered form.
  Matrix A = Matrix::Identity(2, 2), B = Matrix::Zero(2, 2),
         C = -Matrix::Identity(2, 2);
  const auto cost2 = dro::QuadraticCost(A, B, C).as_cost();
  Vector xi(2);
  xi << 0.7, -0.4;
  CHECK(dro::shifted_cost_grad_y(cost2, Vector::Ones(2), xi, xi).norm() ==
        doctest::Approx(0.0));
}

TEST_CASE("decision gradient at the shifted point") {
  const auto cost = tiny_quadratic().as_cost();
  CHECK(dro::shifted_cost_grad_x(cost, vec1(2), vec1(1), vec1(0))[0] ==
        doctest::Approx(5.0));

  Matrix A = Matrix::Identity(2, 2), B(2, 1), C(1, 1);
  B << 1.0, 0.0;
  C << -1.0;
  const auto cost2 = dro::QuadraticCost(A, B, C).as_cost();
  const Vector g = dro::shifted_cost_grad_x(cost2, Vector::Ones(2), vec1(3),
                                            vec1(1));
  CHECK(g[0] == doctest::Approx(4.0));
  CHECK(g[1] == doctest::Approx(2.0));

  Matrix B0 = Matrix::Zero(2, 1);
  const auto cost3 = dro::QuadraticCost(A, B0, C).as_cost();
  CHECK(dro::shifted_cost_grad_x(cost3, Vector::Zero(2), vec1(3), vec1(0))
            .norm() == doctest::Approx(0.0));
}

TEST_CASE("construction symmetrizes and verifies definiteness") {
  Matrix A(2, 2), B = Matrix::Zero(2, 1), C(1, 1);
  A << 1.0, 0.8, -0.8, 1.0;  // asymmetric; symmetric part is the identity
  C << -1.0;
  const dro::QuadraticCost q(A, B, C);
  CHECK(q.A()(0, 1) == doctest::Approx(0.0));
  CHECK(q.A()(1, 0) == doctest::Approx(0.0));

  Matrix Aneg(1, 1), C1(1, 1);
  Aneg << -0.5;
  C1 << -1.0;
  CHECK_THROWS_AS(dro::QuadraticCost(Aneg, Matrix::Zero(1, 1), C1),
                  std::invalid_argument);
  Matrix A1(1, 1), Cpos(1, 1);
  A1 << 1.0;
  Cpos << 1e-3;
  CHECK_THROWS_AS(dro::QuadraticCost(A1, Matrix::Zero(1, 1), Cpos),
                  std::invalid_argument);
  Matrix Czero(1, 1);
  Czero << 0.0;  // not strictly negative definite
  CHECK_THROWS_AS(dro::QuadraticCost(A1, Matrix::Zero(1, 1), Czero),
                  std::invalid_argument);
}

TEST_CASE("randomized consistency checks pass for valid instances") {
  dro::Rng rng(7);
  Matrix G(3, 3), H(4, 4), B(3, 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) G(i, j) = rng.normal();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) H(i, j) = rng.normal();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) B(i, j) = rng.uniform(-1.0, 1.0);
  const Matrix A = G.transpose() * G / 3.0;
  const Matrix C = -(H.transpose() * H / 4.0 + 0.1 * Matrix::Identity(4, 4));
  const auto cost = dro::QuadraticCost(A, B, C).as_cost();
  CHECK_NOTHROW(dro::check_cost_consistency(cost));

  dro::CostCheckOptions strict;
  strict.gradient_tol = 1e-4;
  strict.probes = 100;
  CHECK_NOTHROW(dro::check_cost_consistency(cost, strict));
}

TEST_CASE("consistency checks catch a wrong gradient") {
  auto cost = tiny_quadratic().as_cost();
  cost.grad_x = [](const Vector& x, const Vector& xi) {
    return Vector(2.0 * x + 3.0 * xi);  // wrong coupling term
  };
  cost.make_slice = nullptr;
  CHECK_THROWS_AS(dro::check_cost_consistency(cost), std::invalid_argument);
}

TEST_CASE("consistency checks catch non-convexity") {
  dro::CostFunction f;
  f.dim_x = 1;
  f.dim_xi = 1;
  f.eval = [](const Vector& x, const Vector& xi) {
    return -x[0] * x[0] - xi[0] * xi[0];  // concave in x
  };
  f.grad_x = [](const Vector& x, const Vector&) { return Vector(-2.0 * x); };
  f.grad_xi = [](const Vector&, const Vector& xi) {
    return Vector(-2.0 * xi);
  };
  CHECK_THROWS_AS(dro::check_cost_consistency(f), std::invalid_argument);
}

TEST_CASE("slice agrees with the full cost") {
  dro::Rng rng(11);
  Matrix G(4, 4), H(3, 3), B(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) G(i, j) = rng.normal();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) H(i, j) = rng.normal();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) B(i, j) = rng.uniform(-1.0, 1.0);
  const auto q = dro::QuadraticCost(G.transpose() * G / 4.0, B,
                                    -(H.transpose() * H / 3.0 +
                                      0.1 * Matrix::Identity(3, 3)));
  const auto cost = q.as_cost();
  Vector x(4);
  x << 0.5, -1.0, 2.0, 0.1;
  const auto slice = dro::slice_at(cost, x);
  for (int t = 0; t < 20; ++t) {
    Vector xi(3);
    xi << rng.normal(), rng.normal(), rng.normal();
    CHECK(slice.eval(xi) == doctest::Approx(cost.eval(x, xi)));
    CHECK((slice.grad_xi(xi) - cost.grad_xi(x, xi)).norm() ==
          doctest::Approx(0.0));
    CHECK((slice.grad_x(xi) - cost.grad_x(x, xi)).norm() ==
          doctest::Approx(0.0));
  }
}

TEST_CASE("json round trip preserves the instance") {
  const auto q = tiny_quadratic();
  const auto text = dro::to_json_string(q);
  const auto back = dro::quadratic_cost_from_json(text);
  CHECK(back.dim_x() == 1);
  CHECK(back.dim_xi() == 1);
  CHECK(back.A()(0, 0) == doctest::Approx(1.0));
  CHECK(back.B()(0, 0) == doctest::Approx(1.0));
  CHECK(back.C()(0, 0) == doctest::Approx(-1.0));
  CHECK_THROWS(dro::quadratic_cost_from_json("{\"dim_x\": 1}"));
}
