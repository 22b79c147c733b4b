// Streaming distributionally robust optimization driver.
//
// Subcommands:
//   run       generate (or load) a problem and a timed sample stream, solve
//             online, and write run artifacts (log, curve, summary, result)
//   validate  estimate the expected-cost optimum for a problem file from a
//             large validation draw
//   replay    re-score the exposure events of an existing run log

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <string>

#include "dro/harness.hpp"

namespace {

int cmd_run(const dro::RunConfig& cfg) {
  const auto art = dro::run_experiment(cfg);
  std::cout << "final n: " << art.final_n << "\n";
  if (!art.curve.empty())
    std::cout << "final R: " << art.final_goodness << "\n";
  else
    std::cout << "no certificate produced\n";
  std::cout << "artifacts in: " << cfg.out_dir << "\n";
  return art.exit_code;
}

int cmd_validate(const std::string& problem_file, long n_val,
                 std::uint64_t seed) {
  const dro::QuadraticCost cost = dro::load_problem_file(problem_file);
  const auto spec = dro::MixtureSpec::defaults(cost.dim_xi());
  const auto res = dro::validation_optimum(cost, spec, n_val, seed);
  nlohmann::ordered_json j;
  j["x_star"] = std::vector<double>(res.x_star.data(),
                                    res.x_star.data() + res.x_star.size());
  j["j_star"] = res.j_star;
  j["converged"] = res.converged;
  std::cout << j.dump(2) << "\n";
  return res.converged ? 0 : 2;
}

int cmd_replay(const std::string& log_file, double j_star,
               const std::string& out_file, dro::OutputFormat format) {
  std::ifstream in(log_file);
  if (!in.good()) {
    std::cerr << "cannot open log: " << log_file << "\n";
    return 1;
  }
  const auto events = dro::read_log_jsonl(in);
  const auto curve = dro::rescore_log(events, j_star);
  if (out_file.empty()) {
    dro::write_curve(std::cout, curve, format);
  } else {
    std::ofstream out(out_file);
    dro::write_curve(out, curve, format);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming decisions with worst-case performance certificates"};
  app.require_subcommand(1);

  dro::RunConfig cfg;
  cfg.virtual_clock = false;
  std::string format = "csv";

  auto* run = app.add_subcommand("run", "solve against a sample stream");
  run->add_option("--dim-x", cfg.dim_x, "decision dimension");
  run->add_option("--dim-xi", cfg.dim_xi, "uncertainty dimension");
  run->add_option("--num-samples", cfg.num_samples, "stream length");
  run->add_option("--seed", cfg.seed, "run seed");
  run->add_option("--eps", cfg.eps, "termination tolerance");
  run->add_option("--c1", cfg.c1, "concentration constant c1");
  run->add_option("--c2", cfg.c2, "concentration constant c2");
  run->add_option("--a", cfg.a, "light-tail exponent");
  run->add_option("--arrival-min-ms", cfg.arrival_min_ms,
                  "shortest inter-arrival gap");
  run->add_option("--arrival-max-ms", cfg.arrival_max_ms,
                  "longest inter-arrival gap");
  run->add_flag("--immediate", cfg.immediate, "all samples available at t=0");
  run->add_option("--validation-samples", cfg.validation_samples,
                  "validation draw size");
  run->add_flag("--virtual-clock", cfg.virtual_clock,
                "deterministic simulated time instead of wall time");
  run->add_option("--tick-ms", cfg.tick_ms,
                  "virtual milliseconds per solver checkpoint");
  run->add_option("--out", cfg.out_dir, "output directory")->required();
  run->add_option("--format", format, "curve format: csv|jsonl")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  run->add_option("--problem-file", cfg.problem_file,
                  "JSON problem instead of a random instance");
  run->add_option("--samples-file", cfg.samples_file,
                  "JSONL samples instead of generated draws");
  run->add_option("--period-iteration-cap", cfg.period_iteration_cap,
                  "per-period iteration cap");
  run->add_option("--wall-limit-s", cfg.wall_limit_s, "run time cap");

  std::string problem_file;
  long n_val = 10000;
  std::uint64_t vseed = 1;
  auto* validate = app.add_subcommand("validate", "estimate the optimum");
  validate->add_option("--problem-file", problem_file)->required();
  validate->add_option("--validation-samples", n_val);
  validate->add_option("--seed", vseed);

  std::string log_file, replay_out;
  double j_star = 0.0;
  auto* replay = app.add_subcommand("replay", "re-score a run log");
  replay->add_option("--log", log_file)->required();
  replay->add_option("--j-star", j_star)->required();
  replay->add_option("--out", replay_out, "curve file (stdout when omitted)");
  replay->add_option("--format", format)
      ->check(CLI::IsMember({"csv", "jsonl"}));

  CLI11_PARSE(app, argc, argv);
  cfg.format = format == "jsonl" ? dro::OutputFormat::jsonl
                                 : dro::OutputFormat::csv;

  try {
    if (run->parsed()) return cmd_run(cfg);
    if (validate->parsed()) return cmd_validate(problem_file, n_val, vseed);
    if (replay->parsed())
      return cmd_replay(log_file, j_star, replay_out, cfg.format);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
