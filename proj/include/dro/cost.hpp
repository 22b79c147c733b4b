#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>

namespace dro {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A cost with the decision folded in: maps uncertainty points to values and
/// gradients. Hot loops evaluate thousands of uncertainty points against a
/// single decision, so concrete families precompute the x-dependent terms.
struct CostSlice {
  Eigen::Index dim_xi = 0;
  std::function<double(const Vector& xi)> eval;
  std::function<Vector(const Vector& xi)> grad_xi;
  std::function<Vector(const Vector& xi)> grad_x;
  bool quadratic_in_xi = false;
};

/// Cost model f(x, xi): convex in the decision x, concave in the uncertainty
/// xi, continuously differentiable in both. The two partial gradients must be
/// supplied; consistency with finite differences is checked when an instance
/// is assembled (see check_cost_consistency).
struct CostFunction {
  Eigen::Index dim_x = 0;
  Eigen::Index dim_xi = 0;
  std::function<double(const Vector& x, const Vector& xi)> eval;
  std::function<Vector(const Vector& x, const Vector& xi)> grad_x;
  std::function<Vector(const Vector& x, const Vector& xi)> grad_xi;
  /// True when xi -> f(x, xi) is quadratic for every fixed x; downstream
  /// solvers then use exact line searches instead of golden section.
  bool quadratic_in_xi = false;
  /// Optional partial-evaluation hook; when absent, slice_at falls back to
  /// wrapping the closures above.
  std::function<CostSlice(const Vector& x)> make_slice;
};

/// Partially evaluates the cost at a fixed decision.
CostSlice slice_at(const CostFunction& cost, const Vector& x);

/// Convex-concave quadratic f(x, xi) = x'Ax + x'B xi + xi'C xi with A
/// positive semidefinite and C negative definite. A and C are symmetrized at
/// construction; the quadratic forms only see the symmetric part. Eigenvalue
/// checks run at construction so invalid instances fail fast instead of
/// diverging inside the solvers.
class QuadraticCost {
 public:
  QuadraticCost(Matrix A, Matrix B, Matrix C);

  Eigen::Index dim_x() const { return A_.rows(); }
  Eigen::Index dim_xi() const { return C_.rows(); }
  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& C() const { return C_; }

  double eval(const Vector& x, const Vector& xi) const {
    return x.dot(A_ * x) + x.dot(B_ * xi) + xi.dot(C_ * xi);
  }
  Vector grad_x(const Vector& x, const Vector& xi) const {
    return 2.0 * (A_ * x) + B_ * xi;
  }
  Vector grad_xi(const Vector& x, const Vector& xi) const {
    return B_.transpose() * x + 2.0 * (C_ * xi);
  }

  /// Wraps the instance in the generic interface, with a slice hook that
  /// folds x'Ax, B'x and 2Ax once per decision.
  CostFunction as_cost() const;

 private:
  Matrix A_, B_, C_;
};

/// f(x, xi_hat - y): the cost at a sample shifted by a perturbation.
double shifted_cost(const CostFunction& cost, const Vector& x,
                    const Vector& xi_hat, const Vector& y);

/// Gradient of y -> f(x, xi_hat - y), i.e. -grad_xi evaluated at the shifted
/// point.
Vector shifted_cost_grad_y(const CostFunction& cost, const Vector& x,
                           const Vector& xi_hat, const Vector& y);

/// Gradient of x -> f(x, xi_hat - y) at the shifted point.
Vector shifted_cost_grad_x(const CostFunction& cost, const Vector& x,
                           const Vector& xi_hat, const Vector& y);

struct CostCheckOptions {
  int probes = 100;
  double midpoint_slack = 1e-9;
  double gradient_tol = 1e-5;
  double probe_scale = 2.0;
  std::uint64_t seed = 0x5eedc0de;
};

/// Randomized midpoint tests for convexity in x and concavity in xi, plus
/// central-difference checks of both gradients (step 1e-6*(1+|coord|)).
/// Throws std::invalid_argument naming the first violated property.
void check_cost_consistency(const CostFunction& cost,
                            const CostCheckOptions& opts = {});

/// JSON document {dim_x, dim_xi, A, B, C} with row-major matrices.
std::string to_json_string(const QuadraticCost& cost);
QuadraticCost quadratic_cost_from_json(const std::string& text);
QuadraticCost load_problem_file(const std::string& path);

}  // namespace dro
