#include "dro/cost.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "dro/rng.hpp"

namespace dro {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_dims(const CostFunction& cost, const Vector& x, const Vector& xi) {
  require(x.size() == cost.dim_x, "decision dimension mismatch");
  require(xi.size() == cost.dim_xi, "uncertainty dimension mismatch");
}

Matrix symmetrize(const Matrix& M) { return 0.5 * (M + M.transpose()); }

}  // namespace

CostSlice slice_at(const CostFunction& cost, const Vector& x) {
  require(x.size() == cost.dim_x, "decision dimension mismatch");
  if (cost.make_slice) return cost.make_slice(x);
  CostSlice s;
  s.dim_xi = cost.dim_xi;
  s.quadratic_in_xi = cost.quadratic_in_xi;
  s.eval = [cost, x](const Vector& xi) { return cost.eval(x, xi); };
  s.grad_xi = [cost, x](const Vector& xi) { return cost.grad_xi(x, xi); };
  s.grad_x = [cost, x](const Vector& xi) { return cost.grad_x(x, xi); };
  return s;
}

QuadraticCost::QuadraticCost(Matrix A, Matrix B, Matrix C) {
  require(A.rows() == A.cols(), "A must be square");
  require(C.rows() == C.cols(), "C must be square");
  require(B.rows() == A.rows() && B.cols() == C.rows(),
          "B must be dim_x by dim_xi");
  A_ = symmetrize(A);
  B_ = std::move(B);
  C_ = symmetrize(C);
  Eigen::SelfAdjointEigenSolver<Matrix> esA(A_, Eigen::EigenvaluesOnly);
  require(esA.eigenvalues().minCoeff() >= -1e-10,
          "A must be positive semidefinite");
  Eigen::SelfAdjointEigenSolver<Matrix> esC(C_, Eigen::EigenvaluesOnly);
  require(esC.eigenvalues().maxCoeff() <= -1e-10,
          "C must be negative definite");
}

CostFunction QuadraticCost::as_cost() const {
  CostFunction f;
  f.dim_x = dim_x();
  f.dim_xi = dim_xi();
  f.quadratic_in_xi = true;
  QuadraticCost q = *this;
  f.eval = [q](const Vector& x, const Vector& xi) { return q.eval(x, xi); };
  f.grad_x = [q](const Vector& x, const Vector& xi) {
    return q.grad_x(x, xi);
  };
  f.grad_xi = [q](const Vector& x, const Vector& xi) {
    return q.grad_xi(x, xi);
  };
  f.make_slice = [q](const Vector& x) {
    CostSlice s;
    s.dim_xi = q.dim_xi();
    s.quadratic_in_xi = true;
    const double xax = x.dot(q.A() * x);
    const Vector btx = q.B().transpose() * x;
    const Vector ax2 = 2.0 * (q.A() * x);
    // Shared storage keeps the slice cheap to copy and safe to outlive q.
    auto Bp = std::make_shared<Matrix>(q.B());
    auto Cp = std::make_shared<Matrix>(q.C());
    s.eval = [xax, btx, Cp](const Vector& xi) {
      return xax + btx.dot(xi) + xi.dot((*Cp) * xi);
    };
    s.grad_xi = [btx, Cp](const Vector& xi) -> Vector {
      return btx + 2.0 * ((*Cp) * xi);
    };
    s.grad_x = [ax2, Bp](const Vector& xi) -> Vector {
      return ax2 + (*Bp) * xi;
    };
    return s;
  };
  return f;
}

double shifted_cost(const CostFunction& cost, const Vector& x,
                    const Vector& xi_hat, const Vector& y) {
  check_dims(cost, x, xi_hat);
  require(y.size() == cost.dim_xi, "perturbation dimension mismatch");
  return cost.eval(x, xi_hat - y);
}

Vector shifted_cost_grad_y(const CostFunction& cost, const Vector& x,
                           const Vector& xi_hat, const Vector& y) {
  check_dims(cost, x, xi_hat);
  require(y.size() == cost.dim_xi, "perturbation dimension mismatch");
  return -cost.grad_xi(x, xi_hat - y);
}

Vector shifted_cost_grad_x(const CostFunction& cost, const Vector& x,
                           const Vector& xi_hat, const Vector& y) {
  check_dims(cost, x, xi_hat);
  require(y.size() == cost.dim_xi, "perturbation dimension mismatch");
  return cost.grad_x(x, xi_hat - y);
}

namespace {

Vector random_vector(Rng& rng, Eigen::Index n, double scale) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

double central_difference(const std::function<double(double)>& phi, double h) {
  return (phi(h) - phi(-h)) / (2.0 * h);
}

}  // namespace

void check_cost_consistency(const CostFunction& cost,
                            const CostCheckOptions& opts) {
  require(cost.dim_x >= 1 && cost.dim_xi >= 1, "dimensions must be positive");
  require(static_cast<bool>(cost.eval) && static_cast<bool>(cost.grad_x) &&
              static_cast<bool>(cost.grad_xi),
          "cost closures must all be set");
  Rng rng(opts.seed);
  for (int p = 0; p < opts.probes; ++p) {
    const Vector x1 = random_vector(rng, cost.dim_x, opts.probe_scale);
    const Vector x2 = random_vector(rng, cost.dim_x, opts.probe_scale);
    const Vector xi1 = random_vector(rng, cost.dim_xi, opts.probe_scale);
    const Vector xi2 = random_vector(rng, cost.dim_xi, opts.probe_scale);
    const double t = rng.uniform();

    const double lhs_x = cost.eval(t * x1 + (1 - t) * x2, xi1);
    const double rhs_x = t * cost.eval(x1, xi1) + (1 - t) * cost.eval(x2, xi1);
    require(lhs_x <= rhs_x + opts.midpoint_slack,
            "cost is not convex in the decision");

    const double lhs_xi = cost.eval(x1, t * xi1 + (1 - t) * xi2);
    const double rhs_xi =
        t * cost.eval(x1, xi1) + (1 - t) * cost.eval(x1, xi2);
    require(lhs_xi + opts.midpoint_slack >= rhs_xi,
            "cost is not concave in the uncertainty");

    const Vector gx = cost.grad_x(x1, xi1);
    const Vector gxi = cost.grad_xi(x1, xi1);
    require(gx.size() == cost.dim_x && gxi.size() == cost.dim_xi,
            "gradient dimension mismatch");
    for (Eigen::Index i = 0; i < cost.dim_x; ++i) {
      const double h = 1e-6 * (1.0 + std::abs(x1[i]));
      Vector xp = x1;
      const double fd = central_difference(
          [&](double d) {
            xp[i] = x1[i] + d;
            return cost.eval(xp, xi1);
          },
          h);
      require(std::abs(gx[i] - fd) <= opts.gradient_tol * (1.0 + std::abs(fd)),
              "grad_x disagrees with finite differences");
    }
    for (Eigen::Index i = 0; i < cost.dim_xi; ++i) {
      const double h = 1e-6 * (1.0 + std::abs(xi1[i]));
      Vector xip = xi1;
      const double fd = central_difference(
          [&](double d) {
            xip[i] = xi1[i] + d;
            return cost.eval(x1, xip);
          },
          h);
      require(
          std::abs(gxi[i] - fd) <= opts.gradient_tol * (1.0 + std::abs(fd)),
          "grad_xi disagrees with finite differences");
    }
  }
}

namespace {

nlohmann::json matrix_to_json(const Matrix& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index rows,
                        Eigen::Index cols) {
  require(j.is_array() && static_cast<Eigen::Index>(j.size()) == rows,
          "matrix has wrong row count");
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    require(row.is_array() && static_cast<Eigen::Index>(row.size()) == cols,
            "matrix has wrong column count");
    for (Eigen::Index c = 0; c < cols; ++c)
      M(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return M;
}

}  // namespace

std::string to_json_string(const QuadraticCost& cost) {
  nlohmann::ordered_json j;
  j["dim_x"] = cost.dim_x();
  j["dim_xi"] = cost.dim_xi();
  j["A"] = matrix_to_json(cost.A());
  j["B"] = matrix_to_json(cost.B());
  j["C"] = matrix_to_json(cost.C());
  return j.dump();
}

QuadraticCost quadratic_cost_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  const auto d = j.at("dim_x").get<Eigen::Index>();
  const auto m = j.at("dim_xi").get<Eigen::Index>();
  require(d >= 1 && m >= 1, "dimensions must be positive");
  return QuadraticCost(matrix_from_json(j.at("A"), d, d),
                       matrix_from_json(j.at("B"), d, m),
                       matrix_from_json(j.at("C"), m, m));
}

QuadraticCost load_problem_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open problem file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return quadratic_cost_from_json(buf.str());
}

}  // namespace dro
