#ifndef GIBBSDDRM_CALIBRATION_HPP_
#define GIBBSDDRM_CALIBRATION_HPP_

// Desk-scale experiments shared by the `calibrate` subcommand and the
// acceptance suite, so both measure exactly the same thing.

#include "gibbsddrm/bench.hpp"
#include "gibbsddrm/oracle.hpp"

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace gibbsddrm::calibration {

// Linear-Gaussian fidelity check: average many non-blind DDRM restorations
// of one measurement and compare the ground-truth MSE of the average with
// that of the exact posterior mean.
struct FidelityResult {
  int runs = 0;
  double mse_mmse = 0.0;
  double mse_ddrm_mean = 0.0;
  double relative_gap = 0.0;  // |mse_ddrm_mean - mse_mmse| / mse_mmse
};

FidelityResult ddrm_fidelity(int runs, std::uint64_t seed);

// Committed by `gibbsddrm calibrate` (data/calibration.json).
inline constexpr double kFidelityBand = 0.25;

// One seed of the 1-D blind deconvolution suite.
struct SeedOutcome {
  std::uint64_t seed = 0;
  double init_kernel_error = 0.0;
  double kernel_error = 0.0;
  double psnr_blind = 0.0;          // raw
  double psnr_blind_aligned = 0.0;  // after undoing the kernel shift
  double psnr_pinv = 0.0;
  double psnr_nonblind = 0.0;
  long evals_gibbs = -1;    // denoiser evaluations to reach the threshold
  long evals_blocked = -1;  // same for blocked Gibbs (-1: never)
  bool recovered() const;   // kernel_error <= threshold and psnr > pinv
  double threshold() const { return kThresholdFactor * init_kernel_error; }

  static constexpr double kThresholdFactor = 0.5;
};

// Runs gibbsddrm, ddrm (true kernel), pinv and optionally blocked Gibbs on
// one generated problem.
SeedOutcome run_benchmark_seed(const bench::ExperimentConfig& config,
                               std::uint64_t seed, bool with_blocked);

struct BenchmarkSummary {
  int seeds = 0;
  double recovery_rate = 0.0;   // kernel and PSNR targets both met
  double upper_bound_rate = 0.0;  // non-blind PSNR >= blind (aligned) PSNR
  // Medians over seeds; a seed that never reaches the threshold counts as
  // +infinity (serialized as -1 when the median itself is infinite).
  double median_evals_gibbs = 0.0;
  double median_evals_blocked = 0.0;
};

BenchmarkSummary summarize(const std::vector<SeedOutcome>& outcomes);
double median_evals(std::vector<long> evals);

// The linear-Gaussian chain used for the sampler-order checks: scalar
// signal and measurement, y = phi x_0 + noise, T = 2.
oracle::ToyModel sampler_order_toy();
oracle::ToyModel toy_from_json(const nlohmann::json& doc);
nlohmann::json toy_to_json(const oracle::ToyModel& toy);

nlohmann::json outcome_to_json(const SeedOutcome& o);
nlohmann::json summary_to_json(const BenchmarkSummary& s);

}  // namespace gibbsddrm::calibration

#endif  // GIBBSDDRM_CALIBRATION_HPP_
