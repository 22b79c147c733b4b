#include "dro/ambiguity.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <utility>

namespace dro {

SampleSet::SampleSet(Eigen::Index dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("sample dimension must be positive");
}

void SampleSet::append(Vector xi) {
  if (xi.size() != dim_)
    throw std::invalid_argument("sample dimension mismatch");
  samples_.push_back(std::move(xi));
}

DiscreteDistribution empirical_distribution(const SampleSet& samples) {
  if (samples.empty())
    throw std::invalid_argument("empirical distribution of an empty sample set");
  DiscreteDistribution d;
  d.atoms = samples.samples();
  const auto n = samples.size();
  d.weights = Vector::Constant(n, 1.0 / static_cast<double>(n));
  return d;
}

RadiusParams::RadiusParams(double c1_in, double c2_in, double a_in,
                           Eigen::Index dim_xi_in)
    : c1(c1_in), c2(c2_in), a(a_in), dim_xi(dim_xi_in) {
  if (!(c1 > 0.0)) throw std::invalid_argument("c1 must be positive");
  if (!(c2 > 0.0)) throw std::invalid_argument("c2 must be positive");
  if (!(a > 1.0)) throw std::invalid_argument("tail exponent a must exceed 1");
  if (dim_xi < 1) throw std::invalid_argument("dimension must be positive");
  if (dim_xi == 2)
    throw std::invalid_argument(
        "uncertainty dimension 2 is outside the validity of the radius "
        "formula; use m = 1 or m >= 3");
}

double wasserstein_radius(const RadiusParams& params, long n, double beta_n) {
  if (n < 1) throw std::invalid_argument("sample count must be positive");
  if (!(beta_n > 0.0 && beta_n < 1.0))
    throw std::invalid_argument("confidence level must lie in (0,1)");
  if (!(beta_n < params.c1))
    throw std::invalid_argument(
        "confidence level must be below c1; radius undefined");
  const double L = std::log(params.c1 / beta_n) / params.c2;
  const double ratio = L / static_cast<double>(n);
  const double small_exp =
      1.0 / static_cast<double>(std::max<Eigen::Index>(2, params.dim_xi));
  if (static_cast<double>(n) >= L) return std::pow(ratio, small_exp);
  return std::pow(ratio, 1.0 / params.a);
}

double default_beta(long n) {
  return 0.95 * std::exp(1.0 - std::sqrt(static_cast<double>(n)));
}

ReliabilitySchedule ReliabilitySchedule::default_schedule() {
  return ReliabilitySchedule(&default_beta);
}

ReliabilitySchedule::ReliabilitySchedule(std::function<double(long)> beta)
    : beta_(std::move(beta)) {
  if (!beta_) throw std::invalid_argument("schedule must be callable");
}

double ReliabilitySchedule::operator()(long n) const {
  if (n < 1) throw std::invalid_argument("sample count must be positive");
  const double b = beta_(n);
  if (!(b > 0.0 && b < 1.0))
    throw std::invalid_argument("schedule value outside (0,1)");
  return b;
}

void ReliabilitySchedule::check_monotone(long horizon) const {
  double prev = (*this)(1);
  for (long n = 2; n <= horizon; ++n) {
    const double b = (*this)(n);
    if (!(b < prev))
      throw std::invalid_argument(
          "confidence schedule must be strictly decreasing");
    prev = b;
  }
}

std::vector<Vector> read_samples_jsonl(std::istream& in, Eigen::Index dim) {
  std::vector<Vector> out;
  std::string line;
  long expected = 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const long k = j.at("n").get<long>();
    if (k != expected)
      throw std::invalid_argument("sample records must be in order");
    const auto& xi = j.at("xi");
    if (static_cast<Eigen::Index>(xi.size()) != dim)
      throw std::invalid_argument("sample dimension mismatch in record");
    Vector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      v[i] = xi[static_cast<std::size_t>(i)].get<double>();
    out.push_back(std::move(v));
    ++expected;
  }
  return out;
}

void write_samples_jsonl(std::ostream& out,
                         const std::vector<Vector>& samples) {
  long k = 1;
  for (const auto& xi : samples) {
    nlohmann::ordered_json j;
    j["n"] = k++;
    j["xi"] = std::vector<double>(xi.data(), xi.data() + xi.size());
    out << j.dump() << "\n";
  }
}

std::string to_json_string(const DiscreteDistribution& dist) {
  nlohmann::ordered_json j;
  j["atoms"] = nlohmann::json::array();
  for (const auto& a : dist.atoms)
    j["atoms"].push_back(std::vector<double>(a.data(), a.data() + a.size()));
  j["weights"] = std::vector<double>(dist.weights.data(),
                                     dist.weights.data() + dist.weights.size());
  return j.dump();
}

}  // namespace dro
