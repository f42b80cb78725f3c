#include "gibbsddrm/bench.hpp"
#include "gibbsddrm/calibration.hpp"
#include "gibbsddrm/io.hpp"
#include "gibbsddrm/metrics.hpp"
#include "gibbsddrm/oracle.hpp"
#include "gibbsddrm/reference_samplers.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace bench = gibbsddrm::bench;
namespace calibration = gibbsddrm::calibration;
namespace io = gibbsddrm::io;
namespace oracle = gibbsddrm::oracle;
namespace fs = std::filesystem;
using gibbsddrm::Vector;

namespace {

struct Overrides {
  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string mode;
  std::string out;
  unsigned threads = 0;
};

bench::ExperimentConfig load_with_overrides(const Overrides& o) {
  bench::ExperimentConfig config = bench::load_config(o.config_path);
  if (!o.seeds.empty()) config.seeds = o.seeds;
  if (!o.mode.empty()) config.mode = o.mode;
  if (!o.out.empty()) config.output_dir = o.out;
  bench::validate_config(config);
  return config;
}

unsigned thread_count(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string psnr_text(const std::optional<double>& p) {
  return p ? fmt(*p) : std::string("inf");
}

int cmd_generate(const Overrides& o) {
  const bench::ExperimentConfig config = load_with_overrides(o);
  bench::for_each_seed(config.seeds, thread_count(o.threads), [&](std::uint64_t seed) {
    const bench::Problem problem = bench::generate_problem(config, seed);
    bench::write_problem(problem, config, bench::seed_dir(config, seed));
    return 0;
  });
  for (std::uint64_t seed : config.seeds) {
    std::cout << "generated " << bench::seed_dir(config, seed).string() << "\n";
  }
  return 0;
}

int cmd_restore(const Overrides& o, bool regenerate) {
  const bench::ExperimentConfig config = load_with_overrides(o);
  const auto runs = bench::for_each_seed(
      config.seeds, thread_count(o.threads), [&](std::uint64_t seed) {
        const fs::path dir = bench::seed_dir(config, seed);
        if (regenerate || !fs::exists(dir / "manifest.json")) {
          bench::write_problem(bench::generate_problem(config, seed), config, dir);
        }
        const bench::Problem problem = bench::load_problem(dir);
        bench::RunOutput run = bench::run_restoration(problem, config, config.mode);
        bench::write_run(run, config, problem, dir);
        return run;
      });
  int failures = 0;
  for (const bench::RunOutput& run : runs) {
    std::cout << "seed " << run.seed << " " << run.mode;
    if (!run.ok) {
      ++failures;
      std::cout << " failed at cycle " << run.failure_step[0] << " t "
                << run.failure_step[1] << " m " << run.failure_step[2] << "\n";
      continue;
    }
    std::cout << " psnr " << psnr_text(run.metrics.psnr_db) << " aligned "
              << psnr_text(run.metrics.psnr_aligned_db) << " kernel_error "
              << fmt(run.metrics.kernel_error) << " (init "
              << fmt(run.init_kernel_error) << ") evals "
              << run.result.denoiser_evaluations << " " << fmt(run.seconds)
              << "s\n";
  }
  return failures ? 1 : 0;
}

Vector json_vector(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<gibbsddrm::Index>(v.size()));
}

int cmd_metrics(const std::string& problem_dir, const std::string& result_path,
                const std::vector<std::string>& csvs, double data_range) {
  gibbsddrm::Metrics m;
  if (!problem_dir.empty()) {
    if (result_path.empty()) throw std::invalid_argument("--result is required with --problem");
    const bench::Problem problem = bench::load_problem(problem_dir);
    const nlohmann::json result = io::read_json(result_path);
    const Vector x = json_vector(result.at("x0_estimate"));
    const Vector phi = json_vector(result.at("phi_estimate"));
    m = gibbsddrm::compute_metrics(problem.x_true, x, problem.kernel_true, phi,
                                   problem.spec.data_range,
                                   bench::alignment_geometry(problem.spec));
    const nlohmann::json recomputed = gibbsddrm::metrics_to_json(m);
    std::cout << recomputed.dump(2) << "\n";
    if (result.contains("metrics") && !result["metrics"].is_null() &&
        result["metrics"] != recomputed) {
      std::cerr << "stored metrics differ from recomputed metrics\n";
      return 1;
    }
    return 0;
  }
  if (csvs.size() != 4) {
    throw std::invalid_argument("give --problem/--result or four CSVs: x_ref x_est phi_ref phi_est");
  }
  m = gibbsddrm::compute_metrics(io::read_csv(csvs[0]), io::read_csv(csvs[1]),
                                 io::read_csv(csvs[2]), io::read_csv(csvs[3]),
                                 data_range);
  std::cout << gibbsddrm::metrics_to_json(m).dump(2) << "\n";
  return 0;
}

struct CalibrateArgs {
  int fidelity_runs = 2000;
  int fidelity_seeds = 5;
  int seeds = 50;
  int efficiency_seeds = 20;
  std::vector<double> step_sizes{1e-6, 2e-6, 4e-6};
  int sweep_seeds = 10;
  bool skip_sweep = false;
};

std::vector<std::uint64_t> seed_range(int n) {
  std::vector<std::uint64_t> out;
  for (int i = 1; i <= n; ++i) out.push_back(static_cast<std::uint64_t>(i));
  return out;
}

int cmd_calibrate(const Overrides& o, const CalibrateArgs& a, const std::string& argv_line) {
  const bench::ExperimentConfig config = load_with_overrides(o);
  const unsigned threads = thread_count(o.threads);
  nlohmann::json doc;
  doc["recipe"] = argv_line;

  std::cerr << "ddrm fidelity, " << a.fidelity_runs << " runs per measurement\n";
  const auto fidelity = bench::for_each_seed(
      seed_range(a.fidelity_seeds), threads, [&](std::uint64_t seed) {
        return calibration::ddrm_fidelity(a.fidelity_runs, seed);
      });
  nlohmann::json measurements = nlohmann::json::array();
  double worst = 0.0;
  for (size_t i = 0; i < fidelity.size(); ++i) {
    const calibration::FidelityResult& f = fidelity[i];
    worst = std::max(worst, f.relative_gap);
    measurements.push_back({{"seed", i + 1},
                            {"mse_mmse", f.mse_mmse},
                            {"mse_ddrm_mean", f.mse_ddrm_mean},
                            {"relative_gap", f.relative_gap}});
  }
  doc["ddrm_fidelity"] = {{"runs", a.fidelity_runs},
                          {"band", calibration::kFidelityBand},
                          {"worst_relative_gap", worst},
                          {"measurements", measurements}};

  if (!a.skip_sweep) {
    nlohmann::json sweep = nlohmann::json::array();
    for (double xi : a.step_sizes) {
      std::cerr << "step size " << xi << "\n";
      bench::ExperimentConfig c = config;
      c.sampler.step_size = xi;
      const auto outcomes = bench::for_each_seed(
          seed_range(a.sweep_seeds), threads, [&](std::uint64_t seed) {
            return calibration::run_benchmark_seed(c, seed, false);
          });
      const calibration::BenchmarkSummary s = calibration::summarize(outcomes);
      sweep.push_back({{"step_size", xi},
                       {"seeds", s.seeds},
                       {"recovery_rate", s.recovery_rate},
                       {"upper_bound_rate", s.upper_bound_rate}});
    }
    doc["step_size_sweep"] = sweep;
  }

  std::cerr << "benchmark, " << a.seeds << " seeds\n";
  const auto outcomes = bench::for_each_seed(
      seed_range(a.seeds), threads, [&](std::uint64_t seed) {
        return calibration::run_benchmark_seed(config, seed,
                                               static_cast<int>(seed) <= a.efficiency_seeds);
      });
  nlohmann::json per_seed = nlohmann::json::array();
  for (const auto& out : outcomes) per_seed.push_back(calibration::outcome_to_json(out));
  nlohmann::json summary = calibration::summary_to_json(calibration::summarize(outcomes));
  // Only the first efficiency_seeds ran blocked Gibbs; see "efficiency".
  summary.erase("median_evals_gibbs");
  summary.erase("median_evals_blocked");
  doc["benchmark"] = {{"config", bench::config_to_json(config)},
                      {"summary", summary},
                      {"kernel_threshold_factor", calibration::SeedOutcome::kThresholdFactor},
                      {"seeds", per_seed}};
  const std::vector<calibration::SeedOutcome> first(
      outcomes.begin(), outcomes.begin() + std::min<size_t>(outcomes.size(), a.efficiency_seeds));
  const calibration::BenchmarkSummary eff = calibration::summarize(first);
  doc["efficiency"] = {{"seeds", eff.seeds},
                       {"median_evals_gibbs", eff.median_evals_gibbs},
                       {"median_evals_blocked", eff.median_evals_blocked}};
  if (!std::isfinite(eff.median_evals_gibbs)) doc["efficiency"]["median_evals_gibbs"] = nullptr;
  if (!std::isfinite(eff.median_evals_blocked)) doc["efficiency"]["median_evals_blocked"] = nullptr;

  const fs::path out = o.out.empty() ? fs::path("data/calibration.json") : fs::path(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  io::write_json(out, doc);
  std::cout << doc["ddrm_fidelity"].dump() << "\n"
            << doc["benchmark"]["summary"].dump() << "\n"
            << doc["efficiency"].dump() << "\n";
  return 0;
}

int cmd_reference(const std::string& variant_name, int sweeps, std::uint64_t seed,
                  const std::string& toy_path, const std::string& out) {
  const oracle::ToyModel toy = toy_path.empty()
                                   ? calibration::sampler_order_toy()
                                   : calibration::toy_from_json(io::read_json(toy_path));
  const auto variant = gibbsddrm::reference_variant_from_string(variant_name);
  gibbsddrm::Rng rng(bench::sampler_seed(seed));
  const gibbsddrm::ReferenceChain chain =
      gibbsddrm::run_reference_samplers(toy, variant, sweeps, rng);
  const gibbsddrm::Matrix draws = chain.x0_phi();
  if (!out.empty()) {
    std::ostringstream csv;
    for (gibbsddrm::Index d = 0; d + 1 < draws.cols(); ++d) csv << "x0_" << d << ",";
    csv << "phi\n";
    for (gibbsddrm::Index r = 0; r < draws.rows(); ++r) {
      for (gibbsddrm::Index c = 0; c < draws.cols(); ++c) {
        csv << (c ? "," : "") << io::format_double(draws(r, c));
      }
      csv << "\n";
    }
    io::write_text(out, csv.str());
  }
  const Vector mean = draws.colwise().mean();
  nlohmann::json summary = {{"variant", gibbsddrm::to_string(variant)},
                            {"sweeps", sweeps},
                            {"seed", seed},
                            {"toy", calibration::toy_to_json(toy)},
                            {"mean", std::vector<double>(mean.data(), mean.data() + mean.size())}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GibbsDDRM blind linear inverse problems at desk scale"};
  app.require_subcommand(1);

  Overrides o;
  auto add_common = [&o](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("-c,--config", o.config_path, "experiment config (JSON)");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("-s,--seed", o.seeds, "seed(s), overriding the config list");
    sub->add_option("-o,--out", o.out, "output directory (calibrate: output file)");
    sub->add_option("-j,--threads", o.threads, "worker threads (default: all cores)");
  };

  auto* gen = app.add_subcommand("generate", "write ground truth, kernel and measurement per seed");
  add_common(gen, true);

  bool regenerate = false;
  auto* restore = app.add_subcommand("restore", "run a sampler on generated problems");
  add_common(restore, true);
  restore->add_option("-m,--mode", o.mode, "gibbsddrm | ddrm | blocked | pinv");
  restore->add_flag("--regenerate", regenerate, "rewrite problem files before restoring");

  std::string problem_dir;
  std::string result_path;
  std::vector<std::string> csvs;
  double data_range = 1.0;
  auto* metrics = app.add_subcommand("metrics", "recompute metrics from stored arrays");
  metrics->add_option("--problem", problem_dir, "problem directory (manifest.json)");
  metrics->add_option("--result", result_path, "result JSON written by restore");
  metrics->add_option("csv", csvs, "x_ref x_est phi_ref phi_est CSV files");
  metrics->add_option("--range", data_range, "data range for PSNR (CSV form)");

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "derive the committed acceptance constants");
  add_common(calibrate, true);
  calibrate->add_option("--fidelity-runs", cal.fidelity_runs);
  calibrate->add_option("--fidelity-seeds", cal.fidelity_seeds);
  calibrate->add_option("--benchmark-seeds", cal.seeds);
  calibrate->add_option("--efficiency-seeds", cal.efficiency_seeds);
  calibrate->add_option("--step-sizes", cal.step_sizes)->delimiter(',');
  calibrate->add_option("--sweep-seeds", cal.sweep_seeds);
  calibrate->add_flag("--skip-sweep", cal.skip_sweep);

  std::string variant = "pcgs";
  int sweeps = 100000;
  std::uint64_t ref_seed = 1;
  std::string toy_path;
  std::string chain_out;
  auto* ref = app.add_subcommand("reference-samplers",
                                 "run a sampler ordering on the linear-Gaussian toy chain");
  ref->add_option("--variant", variant, "sampler1 | sampler2 | sampler3 | pcgs");
  ref->add_option("--sweeps", sweeps);
  ref->add_option("--seed", ref_seed);
  ref->add_option("--toy", toy_path, "toy model JSON (default: built-in)");
  ref->add_option("-o,--out", chain_out, "CSV of (x_0, phi) per sweep");

  CLI11_PARSE(app, argc, argv);

  std::string argv_line = "gibbsddrm";
  for (int i = 1; i < argc; ++i) argv_line += std::string(" ") + argv[i];

  try {
    if (*gen) return cmd_generate(o);
    if (*restore) return cmd_restore(o, regenerate);
    if (*metrics) return cmd_metrics(problem_dir, result_path, csvs, data_range);
    if (*calibrate) return cmd_calibrate(o, cal, argv_line);
    if (*ref) return cmd_reference(variant, sweeps, ref_seed, toy_path, chain_out);
  } catch (const bench::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const io::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
