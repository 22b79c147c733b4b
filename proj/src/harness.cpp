#include "dro/harness.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace dro {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// Sub-seed streams per consumer of randomness.
enum SeedStream : std::uint64_t {
  kInstance = 0,
  kStream = 1,
  kValidation = 2,
  kInitialDecision = 3,
  kArrivals = 4,
};

}  // namespace

MixtureSpec MixtureSpec::defaults(Eigen::Index m) {
  MixtureSpec s;
  s.weight_uniform = 0.5;
  s.uniform_lo = Vector::Constant(m, -2.0);
  s.uniform_hi = Vector::Constant(m, 2.0);
  s.normal_mean = Vector::Constant(m, 2.5);
  s.normal_cov = 4.0 * Matrix::Identity(m, m);
  return s;
}

void MixtureSpec::validate() const {
  require(weight_uniform >= 0.0 && weight_uniform <= 1.0,
          "mixture weight must lie in [0,1]");
  const auto m = uniform_lo.size();
  require(m >= 1, "mixture dimension must be positive");
  require(uniform_hi.size() == m && normal_mean.size() == m &&
              normal_cov.rows() == m && normal_cov.cols() == m,
          "mixture fields disagree on dimension");
  require((uniform_hi - uniform_lo).minCoeff() >= 0.0,
          "uniform bounds must be ordered");
  Eigen::LLT<Matrix> llt(0.5 * (normal_cov + normal_cov.transpose()));
  require(llt.info() == Eigen::Success,
          "normal covariance must be positive definite");
}

MixtureSampler::MixtureSampler(MixtureSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), rng_(seed) {
  spec_.validate();
  chol_ = Eigen::LLT<Matrix>(0.5 * (spec_.normal_cov +
                                    spec_.normal_cov.transpose()))
              .matrixL();
}

Vector MixtureSampler::draw() {
  const auto m = spec_.uniform_lo.size();
  if (rng_.bernoulli(spec_.weight_uniform)) {
    Vector v(m);
    for (Eigen::Index i = 0; i < m; ++i)
      v[i] = rng_.uniform(spec_.uniform_lo[i], spec_.uniform_hi[i]);
    return v;
  }
  Vector z(m);
  for (Eigen::Index i = 0; i < m; ++i) z[i] = rng_.normal();
  return spec_.normal_mean + chol_ * z;
}

void RunConfig::validate() const {
  require(dim_x >= 1 && dim_xi >= 1, "dimensions must be positive");
  require(dim_xi != 2, "uncertainty dimension 2 is not supported");
  require(num_samples >= 0, "sample count must be nonnegative");
  require(eps > 0.0, "eps must be positive");
  require(c1 > 0.0 && c2 > 0.0 && a > 1.0, "invalid radius parameters");
  require(arrival_min_ms >= 0.0 && arrival_max_ms >= arrival_min_ms,
          "invalid arrival window");
  require(validation_samples >= 1, "validation set must not be empty");
  require(tick_ms > 0.0, "tick must be positive");
  require(period_iteration_cap >= 1, "iteration cap must be positive");
  tolerances().validate();
}

ToleranceConfig RunConfig::tolerances() const {
  ToleranceConfig t = ToleranceConfig::from_eps(eps);
  if (eps_hat1) t.eps_hat1 = *eps_hat1;
  if (eps1) t.eps1 = *eps1;
  if (eps2) t.eps2 = *eps2;
  return t;
}

QuadraticCost random_instance(Eigen::Index dim_x, Eigen::Index dim_xi,
                              std::uint64_t seed) {
  Rng rng(seed);
  Matrix G(dim_x, dim_x);
  for (Eigen::Index i = 0; i < dim_x; ++i)
    for (Eigen::Index j = 0; j < dim_x; ++j) G(i, j) = rng.normal();
  Matrix H(dim_xi, dim_xi);
  for (Eigen::Index i = 0; i < dim_xi; ++i)
    for (Eigen::Index j = 0; j < dim_xi; ++j) H(i, j) = rng.normal();
  Matrix B(dim_x, dim_xi);
  for (Eigen::Index i = 0; i < dim_x; ++i)
    for (Eigen::Index j = 0; j < dim_xi; ++j) B(i, j) = rng.uniform(-1.0, 1.0);
  const Matrix A = G.transpose() * G / static_cast<double>(dim_x);
  const Matrix C = -(H.transpose() * H / static_cast<double>(dim_xi) +
                     0.1 * Matrix::Identity(dim_xi, dim_xi));
  return QuadraticCost(A, B, C);
}

Vector random_initial_decision(Eigen::Index dim_x, std::uint64_t seed) {
  Rng rng(seed);
  Vector x(dim_x);
  for (Eigen::Index i = 0; i < dim_x; ++i) x[i] = rng.uniform(0.0, 10.0);
  return x;
}

std::vector<TimedSample> generate_stream(const MixtureSpec& spec,
                                         const RunConfig& cfg) {
  MixtureSampler sampler(spec, mix_seed(cfg.seed, kStream));
  Rng arrivals(mix_seed(cfg.seed, kArrivals));
  std::vector<TimedSample> out;
  out.reserve(static_cast<std::size_t>(cfg.num_samples));
  double t = 0.0;
  for (long k = 0; k < cfg.num_samples; ++k) {
    if (!cfg.immediate)
      t += arrivals.uniform(cfg.arrival_min_ms, cfg.arrival_max_ms) / 1000.0;
    out.push_back(TimedSample{t, sampler.draw()});
  }
  return out;
}

ValidationResult validation_optimum(const QuadraticCost& cost,
                                    const MixtureSpec& spec, long n_val,
                                    std::uint64_t seed) {
  require(n_val >= 1, "validation set must not be empty");
  MixtureSampler sampler(spec, seed);
  const auto m = cost.dim_xi();
  Vector xi_bar = Vector::Zero(m);
  double quad_mean = 0.0;
  for (long k = 0; k < n_val; ++k) {
    const Vector xi = sampler.draw();
    xi_bar += xi;
    quad_mean += xi.dot(cost.C() * xi);
  }
  xi_bar /= static_cast<double>(n_val);
  quad_mean /= static_cast<double>(n_val);

  // First-order condition 2A x = -B xi_bar, solved directly when A allows.
  ValidationResult res;
  const Vector rhs = -(cost.B() * xi_bar);
  Eigen::LDLT<Matrix> ldlt(2.0 * cost.A());
  bool solved = ldlt.info() == Eigen::Success;
  if (solved) {
    res.x_star = ldlt.solve(rhs);
    const double resid = (2.0 * cost.A() * res.x_star - rhs).norm();
    solved = resid <= 1e-8 * (1.0 + rhs.norm());
  }
  if (!solved) {
    // Singular or indefinite-to-machine-precision A: fall back to descent on
    // the sample-average objective.
    CostFunction f = cost.as_cost();
    std::vector<Vector> samples;
    samples.reserve(static_cast<std::size_t>(n_val));
    MixtureSampler again(spec, seed);
    for (long k = 0; k < n_val; ++k) samples.push_back(again.draw());
    return validation_optimum(f, samples);
  }
  res.converged = true;
  res.iterations = 1;
  res.j_star = res.x_star.dot(cost.A() * res.x_star) +
               res.x_star.dot(cost.B() * xi_bar) + quad_mean;
  return res;
}

ValidationResult validation_optimum(const CostFunction& cost,
                                    const std::vector<Vector>& samples) {
  require(!samples.empty(), "validation set must not be empty");
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  const auto objective = [&](const Vector& x) {
    double v = 0.0;
    const CostSlice slice = slice_at(cost, x);
    for (const auto& xi : samples) v += slice.eval(xi);
    return v * inv_n;
  };
  const auto gradient = [&](const Vector& x) {
    Vector g = Vector::Zero(cost.dim_x);
    const CostSlice slice = slice_at(cost, x);
    for (const auto& xi : samples) g += slice.grad_x(xi);
    return Vector(g * inv_n);
  };

  ValidationResult res;
  Vector x = Vector::Zero(cost.dim_x);
  double fx = objective(x);
  const long budget = 200000;
  long it = 0;
  for (; it < budget; ++it) {
    const Vector g = gradient(x);
    if (g.norm() <= 1e-8) {
      res.converged = true;
      break;
    }
    double t = 1.0;
    const double gg = g.squaredNorm();
    while (t > 1e-16) {
      const Vector cand = x - t * g;
      const double fc = objective(cand);
      if (fc <= fx - 1e-4 * t * gg) {
        x = cand;
        fx = fc;
        break;
      }
      t *= 0.5;
    }
    if (t <= 1e-16) break;  // no further progress representable
  }
  res.x_star = x;
  res.j_star = fx;
  res.iterations = it;
  if (!res.converged && gradient(x).norm() <= 1e-8) res.converged = true;
  return res;
}

double relative_goodness(double j_current, double j_star) {
  if (j_star == 0.0)
    throw std::invalid_argument(
        "relative goodness undefined for a zero reference value");
  return std::abs((j_current - j_star) / j_star);
}

std::vector<CurvePoint> rescore_log(const std::vector<LogEvent>& events,
                                    double j_star) {
  std::vector<CurvePoint> curve;
  bool have_certificate = false;
  std::optional<CurvePoint> last;
  for (const auto& e : events) {
    if (e.kind == LogEvent::Kind::cert_done) have_certificate = true;
    const bool exposure = (e.kind == LogEvent::Kind::cert_done ||
                           e.kind == LogEvent::Kind::step ||
                           e.kind == LogEvent::Kind::terminate) &&
                          e.value.has_value();
    if (exposure && have_certificate) {
      CurvePoint p{e.t_s, e.n, e.r, *e.value,
                   relative_goodness(*e.value, j_star),
                   log_event_name(e.kind)};
      curve.push_back(p);
      last = p;
    } else if (e.kind == LogEvent::Kind::admitted && last) {
      // A new certificate is processing; the previous one stays exposed.
      CurvePoint p = *last;
      p.t_s = e.t_s;
      p.n = e.n;
      p.event = "pending";
      curve.push_back(p);
    }
  }
  return curve;
}

std::vector<LogEvent> read_log_jsonl(std::istream& in) {
  std::vector<LogEvent> events;
  std::string line;
  const std::map<std::string, LogEvent::Kind> kinds = {
      {"arrival", LogEvent::Kind::arrival},
      {"admitted", LogEvent::Kind::admitted},
      {"cert_start", LogEvent::Kind::cert_start},
      {"cert_done", LogEvent::Kind::cert_done},
      {"step", LogEvent::Kind::step},
      {"period_end", LogEvent::Kind::period_end},
      {"terminate", LogEvent::Kind::terminate},
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    LogEvent e;
    e.t_s = j.at("t_wall_s").get<double>();
    e.kind = kinds.at(j.at("event").get<std::string>());
    e.n = j.value("n", 0L);
    e.r = j.value("r", 0L);
    if (j.contains("value")) e.value = j["value"].get<double>();
    if (j.contains("gap")) e.gap = j["gap"].get<double>();
    if (j.contains("class")) e.stream_class = j["class"].get<std::string>();
    events.push_back(std::move(e));
  }
  return events;
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void write_curve(std::ostream& out, const std::vector<CurvePoint>& curve,
                 OutputFormat format) {
  if (format == OutputFormat::csv) {
    out << "t_s,n,r,J,R,event\n";
    for (const auto& p : curve)
      out << format_double(p.t_s) << ',' << p.n << ',' << p.r << ','
          << format_double(p.value) << ',' << format_double(p.goodness) << ','
          << p.event << '\n';
    return;
  }
  for (const auto& p : curve) {
    nlohmann::ordered_json j;
    j["t_s"] = p.t_s;
    j["n"] = p.n;
    j["r"] = p.r;
    j["J"] = p.value;
    j["R"] = p.goodness;
    j["event"] = p.event;
    out << j.dump() << '\n';
  }
}

ExperimentArtifacts run_experiment(const RunConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  require(!cfg.out_dir.empty(), "output directory must be set");
  fs::create_directories(cfg.out_dir);
  const auto path = [&](const char* name) {
    return (fs::path(cfg.out_dir) / name).string();
  };

  const QuadraticCost instance =
      cfg.problem_file.empty()
          ? random_instance(cfg.dim_x, cfg.dim_xi, mix_seed(cfg.seed, kInstance))
          : load_problem_file(cfg.problem_file);
  require(instance.dim_x() == cfg.dim_x && instance.dim_xi() == cfg.dim_xi,
          "problem file dimensions disagree with the configuration");
  const CostFunction cost = instance.as_cost();
  check_cost_consistency(cost);

  const MixtureSpec spec = MixtureSpec::defaults(cfg.dim_xi);
  std::vector<TimedSample> schedule = generate_stream(spec, cfg);
  if (!cfg.samples_file.empty()) {
    std::ifstream in(cfg.samples_file);
    require(in.good(), "cannot open samples file: " + cfg.samples_file);
    const auto loaded = read_samples_jsonl(in, cfg.dim_xi);
    require(static_cast<long>(loaded.size()) >= cfg.num_samples,
            "samples file holds fewer records than num_samples");
    for (long k = 0; k < cfg.num_samples; ++k)
      schedule[static_cast<std::size_t>(k)].xi =
          loaded[static_cast<std::size_t>(k)];
  }
  {
    std::ofstream out(path("samples.jsonl"));
    std::vector<Vector> xs;
    xs.reserve(schedule.size());
    for (const auto& s : schedule) xs.push_back(s.xi);
    write_samples_jsonl(out, xs);
  }

  const ValidationResult validation = validation_optimum(
      instance, spec, cfg.validation_samples, mix_seed(cfg.seed, kValidation));
  const Vector x0 =
      random_initial_decision(cfg.dim_x, mix_seed(cfg.seed, kInitialDecision));

  const ToleranceConfig tol = cfg.tolerances();
  const RadiusParams params(cfg.c1, cfg.c2, cfg.a, cfg.dim_xi);
  const ReliabilitySchedule schedule_beta =
      ReliabilitySchedule::default_schedule();

  std::unique_ptr<Clock> clock;
  std::unique_ptr<SampleSource> source;
  if (cfg.virtual_clock) {
    clock = std::make_unique<VirtualClock>(cfg.tick_ms);
    source = std::make_unique<ScheduledStream>(schedule, cfg.dim_xi);
  } else {
    clock = std::make_unique<WallClock>();
    source = std::make_unique<RealTimeStream>(schedule, cfg.dim_xi);
  }

  std::vector<LogEvent> events;
  std::ofstream log_out(path("run_log.jsonl"));
  OnlineHooks hooks;
  hooks.log = [&](const LogEvent& e) {
    events.push_back(e);
    log_out << to_json_line(e) << '\n';
  };

  RunCaps caps;
  caps.period_iteration_cap = cfg.period_iteration_cap;
  caps.wall_limit_s = cfg.wall_limit_s;

  const auto started = std::chrono::steady_clock::now();
  const OnlineResult result =
      run_online(cost, *source, *clock, tol, params, schedule_beta, x0, caps,
                 hooks);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  log_out.close();

  ExperimentArtifacts art;
  art.run_log_path = path("run_log.jsonl");
  art.samples_path = path("samples.jsonl");
  art.curve_path =
      path(cfg.format == OutputFormat::csv ? "r_curve.csv" : "r_curve.jsonl");
  art.summary_path = path("summary.json");
  art.result_path = path("result.json");
  art.j_star = validation.j_star;
  art.final_n = result.n;
  art.flagged = result.flagged || !validation.converged;
  art.exit_code = art.flagged ? 2 : 0;

  art.curve = rescore_log(events, validation.j_star);
  {
    std::ofstream out(art.curve_path);
    write_curve(out, art.curve, cfg.format);
  }
  if (!art.curve.empty()) art.final_goodness = art.curve.back().goodness;

  long count_sslow = 0, count_slow = 0, count_vfast = 0, count_fast = 0;
  for (const auto& c : result.period_classes) {
    if (c.is_sufficiently_slow()) ++count_sslow;
    if (c.is_fast()) ++count_fast;
    if (c.label == StreamClassLabel::slow) ++count_slow;
    if (c.is_very_fast()) ++count_vfast;
  }

  {
    nlohmann::ordered_json j;
    if (art.curve.empty())
      j["final_R"] = nullptr;
    else
      j["final_R"] = art.curve.back().goodness;
    j["final_n"] = result.n;
    if (cfg.virtual_clock) j["virtual_time_s"] = clock->now_s();
    j["wall_time_s"] = elapsed;
    j["j_star"] = validation.j_star;
    j["validation_converged"] = validation.converged;
    j["certificate"] = result.report.has_value();
    j["flagged"] = art.flagged;
    j["periods"] = {
        {"sufficiently_slow", count_sslow},
        {"slow", count_slow},
        {"fast", count_fast},
        {"very_fast", count_vfast},
    };
    std::ofstream out(art.summary_path);
    out << j.dump(2) << '\n';
  }
  {
    nlohmann::ordered_json j;
    if (result.report) {
      j["x"] = std::vector<double>(result.x.data(),
                                   result.x.data() + result.x.size());
      j["value"] = result.report->value;
      j["n"] = result.report->n;
      j["beta_n"] = result.report->beta_n;
      j["radius"] = result.report->radius;
    } else {
      j["x"] = std::vector<double>(result.x.data(),
                                   result.x.data() + result.x.size());
      j["value"] = nullptr;
      j["n"] = result.n;
    }
    std::ofstream out(art.result_path);
    out << j.dump(2) << '\n';
  }
  return art;
}

}  // namespace dro
