#ifndef GIBBSDDRM_BENCH_HPP_
#define GIBBSDDRM_BENCH_HPP_

#include "gibbsddrm/ddrm.hpp"
#include "gibbsddrm/io.hpp"
#include "gibbsddrm/metrics.hpp"
#include "gibbsddrm/pcgs.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace gibbsddrm::bench {

namespace fs = std::filesystem;

// Invalid experiment configuration; field() is the dotted JSON path.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct KernelSpec {
  // random_simplex | gaussian | box | values | file
  std::string type = "random_simplex";
  Index support_h = 1;
  Index support = 5;
  double width = 1.0;          // gaussian: std in taps
  double concentration = 2.0;  // random_simplex: symmetric Dirichlet alpha
  std::vector<double> values;
  std::string path;
};

struct ProblemSpec {
  std::string op = "conv1d";  // conv1d | conv2d
  Index height = 1;
  Index width = 64;
  KernelSpec kernel;
  double sigma_y = 0.02;
  std::string signal_source = "prior";  // prior | file
  std::string signal_path;              // CSV (1-D) or PGM (2-D)
  double data_range = 1.0;
};

struct PriorSpec {
  std::string type = "gmm_templates";  // gmm_templates | gmm_file | gaussian
  int components = 10;
  int segments = 8;    // 1-D: runs per template; 2-D: max rectangles
  int min_length = 4;  // 1-D: shortest run
  double variance = 0.0025;
  double mean = 0.5;  // gaussian
  std::uint64_t seed = 1;
  std::string path;  // gmm_file
};

struct ScheduleSpec {
  std::string type = "geometric";  // geometric | linear
  int steps = 100;
  double sigma_min = 0.005;
  double sigma_max = 2.0;
};

struct InitSpec {
  std::string type = "gaussian";  // gaussian | box | values | prior | true
  double width = 1.0;
  std::vector<double> values;
};

struct SamplerSpec {
  int cycles = 1;
  std::vector<int> inner_table;  // M_t for t = 0..T-1; empty: two-regime
  int inner_switch = 70;
  int inner_count = 3;
  double eta = 0.85;
  double eta_b = 1.0;
  double step_size = 2e-6;
  int langevin_steps = 50;
  double noise_scale = 1.0;
  std::string phi_prior = "flat";  // flat | laplace | gaussian
  double phi_prior_lambda = 0.0;
  bool project_to_simplex = true;
  InitSpec init;
  std::string granularity = "per_step";  // per_step | per_inner_step
  int phi_updates_per_round = 1;          // blocked mode
  // Blocked mode rounds; 0 matches the gibbsddrm phi-update budget
  // (cycles * sum_t M_t updates).
  int blocked_rounds = 0;
};

struct ExperimentConfig {
  ProblemSpec problem;
  PriorSpec prior;
  ScheduleSpec schedule;
  SamplerSpec sampler;
  std::string mode = "gibbsddrm";  // gibbsddrm | ddrm | blocked | pinv
  std::string output_dir = "out";
  std::vector<std::uint64_t> seeds{1};
  fs::path base_dir;  // relative paths resolve against this
};

// Parses and validates; throws ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& doc,
                              const fs::path& base_dir = ".");
ExperimentConfig load_config(const fs::path& path);
void validate_config(const ExperimentConfig& config);
// Normalized form, every field explicit. parse_config(config_to_json(c))
// reproduces c.
nlohmann::json config_to_json(const ExperimentConfig& config);

bool is_mode(const std::string& mode);

NoiseSchedule build_schedule(const ScheduleSpec& spec);
std::shared_ptr<const Denoiser> build_prior(const ExperimentConfig& config);
nlohmann::json prior_to_json(const Denoiser& prior);
std::shared_ptr<const Denoiser> prior_from_json(const nlohmann::json& doc);
PcgsConfig build_pcgs_config(const ExperimentConfig& config,
                             const Vector& true_kernel);
AlignmentGeometry alignment_geometry(const ProblemSpec& spec);

// Deterministic kernels of the benchmark.
Vector gaussian_kernel(Index support_h, Index support, double width);
Vector random_simplex_kernel(Index taps, double concentration, Rng& rng);

struct Problem {
  ProblemSpec spec;
  std::uint64_t seed = 0;
  std::unique_ptr<SpectralOperator> op;  // parameters = true kernel
  std::shared_ptr<const Denoiser> prior;
  Vector x_true;
  Vector kernel_true;
  Vector y;
};

std::unique_ptr<SpectralOperator> build_operator(const ProblemSpec& spec,
                                                 const Vector& kernel);

// x_0, kernel and measurement noise all come from `seed`.
Problem generate_problem(const ExperimentConfig& config, std::uint64_t seed);

// manifest.json plus signal (CSV, or PGM for 2-D), kernel, measurement and
// prior files.
void write_problem(const Problem& problem, const ExperimentConfig& config,
                   const fs::path& dir);
// Re-verifies y == H x exactly when sigma_y == 0.
Problem load_problem(const fs::path& dir);

fs::path seed_dir(const ExperimentConfig& config, std::uint64_t seed);

struct KernelErrorPoint {
  long denoiser_evaluations = 0;
  double kernel_error = 0.0;
};

struct RunOutput {
  std::string mode;
  std::uint64_t seed = 0;
  RestorationResult result;
  bool ok = true;
  Metrics metrics;
  Vector phi_init;
  double init_kernel_error = 0.0;
  std::array<int, 3> failure_step{0, 0, 0};  // (cycle, t, m) of a NaN abort
  // Aligned kernel error before sampling and after every phi update.
  std::vector<KernelErrorPoint> kernel_trace;
  double seconds = 0.0;
};

// Outer rounds used by blocked mode.
int blocked_rounds(const ExperimentConfig& config, const PcgsConfig& pcgs);

// Stream seed for the sampler, distinct from the generation stream.
std::uint64_t sampler_seed(std::uint64_t seed);

// mode: gibbsddrm | ddrm (true kernel) | blocked | pinv (init kernel).
RunOutput run_restoration(const Problem& problem,
                          const ExperimentConfig& config,
                          const std::string& mode);

// Spectral pseudo-inverse H^+ y for the operator's current parameters.
Vector pseudo_inverse(const SpectralOperator& op, const Vector& y);

// First evaluation count at which the kernel error is <= threshold, or -1.
long evaluations_to_threshold(const std::vector<KernelErrorPoint>& trace,
                              double threshold);

// Result document; timing is kept out so the bytes depend only on the seed.
nlohmann::json result_to_json(const RunOutput& run,
                              const ExperimentConfig& config);
// Writes result_<mode>.json, x0/phi CSVs, diagnostics CSV, SVG plot and
// timing_<mode>.json into dir.
void write_run(const RunOutput& run, const ExperimentConfig& config,
               const Problem& problem, const fs::path& dir);

std::string diagnostics_csv(const RunOutput& run, const Problem& problem);
std::string diagnostics_svg(const RunOutput& run, const Problem& problem);

// Runs fn(seed) for every seed on up to `threads` workers; results keep the
// seed order.
template <typename Fn>
auto for_each_seed(const std::vector<std::uint64_t>& seeds, unsigned threads,
                   Fn fn) -> std::vector<decltype(fn(std::uint64_t{}))>;

}  // namespace gibbsddrm::bench

#include "gibbsddrm/bench_parallel.hpp"

#endif  // GIBBSDDRM_BENCH_HPP_
