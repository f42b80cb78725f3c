#include "gibbsddrm/calibration.hpp"

#include "gibbsddrm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gibbsddrm::calibration {

FidelityResult ddrm_fidelity(int runs, std::uint64_t seed) {
  // d = 16 circulant blur, Gaussian prior, the benchmark's noise level.
  const Index d = 16;
  Vector kernel(3);
  kernel << 0.5, 0.3, 0.2;
  const CirculantConvolution1d op(d, kernel);
  const GaussianPrior prior(d, 0.5, 0.04);
  const double sigma_y = 0.02;
  const NoiseSchedule schedule = make_geometric_schedule(50, 0.01, 1.5);

  Rng gen(seed);
  const Vector x_true = prior.sample(gen);
  const Vector y = op.apply(x_true) + sigma_y * gen.normal_vector(d);

  const oracle::GaussianMoments post = oracle::exact_gaussian_posterior(
      prior, DenseOperator(op.to_matrix()), y, sigma_y);

  DdrmParams params;
  params.sigma_y = sigma_y;
  Vector sum = Vector::Zero(d);
  for (int r = 0; r < runs; ++r) {
    Rng rng(bench::sampler_seed(seed * 1000003ULL + static_cast<std::uint64_t>(r)));
    sum += run_ddrm(op, y, schedule, params, prior, rng).x0;
  }
  FidelityResult out;
  out.runs = runs;
  out.mse_mmse = (post.mean - x_true).squaredNorm() / d;
  out.mse_ddrm_mean = (sum / runs - x_true).squaredNorm() / d;
  out.relative_gap = std::abs(out.mse_ddrm_mean - out.mse_mmse) / out.mse_mmse;
  return out;
}

bool SeedOutcome::recovered() const {
  return kernel_error <= threshold() && psnr_blind > psnr_pinv;
}

namespace {

double finite_psnr(const std::optional<double>& p) {
  return p ? *p : std::numeric_limits<double>::infinity();
}

}  // namespace

SeedOutcome run_benchmark_seed(const bench::ExperimentConfig& config,
                               std::uint64_t seed, bool with_blocked) {
  const bench::Problem problem = bench::generate_problem(config, seed);
  SeedOutcome o;
  o.seed = seed;

  const bench::RunOutput blind = bench::run_restoration(problem, config, "gibbsddrm");
  o.init_kernel_error = blind.init_kernel_error;
  if (blind.ok) {
    o.kernel_error = blind.metrics.kernel_error;
    o.psnr_blind = finite_psnr(blind.metrics.psnr_db);
    o.psnr_blind_aligned = finite_psnr(blind.metrics.psnr_aligned_db);
  } else {
    o.kernel_error = std::numeric_limits<double>::infinity();
    o.psnr_blind = o.psnr_blind_aligned = -std::numeric_limits<double>::infinity();
  }
  o.evals_gibbs = bench::evaluations_to_threshold(blind.kernel_trace, o.threshold());

  const bench::RunOutput pinv = bench::run_restoration(problem, config, "pinv");
  o.psnr_pinv = finite_psnr(pinv.metrics.psnr_db);
  const bench::RunOutput nonblind = bench::run_restoration(problem, config, "ddrm");
  o.psnr_nonblind = nonblind.ok ? finite_psnr(nonblind.metrics.psnr_db)
                                : -std::numeric_limits<double>::infinity();
  if (with_blocked) {
    const bench::RunOutput blocked =
        bench::run_restoration(problem, config, "blocked");
    o.evals_blocked =
        bench::evaluations_to_threshold(blocked.kernel_trace, o.threshold());
  }
  return o;
}

double median_evals(std::vector<long> evals) {
  if (evals.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> v;
  for (long e : evals) {
    v.push_back(e < 0 ? std::numeric_limits<double>::infinity()
                      : static_cast<double>(e));
  }
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

BenchmarkSummary summarize(const std::vector<SeedOutcome>& outcomes) {
  BenchmarkSummary s;
  s.seeds = static_cast<int>(outcomes.size());
  if (outcomes.empty()) return s;
  int recovered = 0;
  int bounded = 0;
  std::vector<long> gibbs;
  std::vector<long> blocked;
  for (const SeedOutcome& o : outcomes) {
    recovered += o.recovered();
    bounded += o.psnr_nonblind >= o.psnr_blind_aligned;
    gibbs.push_back(o.evals_gibbs);
    blocked.push_back(o.evals_blocked);
  }
  s.recovery_rate = static_cast<double>(recovered) / s.seeds;
  s.upper_bound_rate = static_cast<double>(bounded) / s.seeds;
  s.median_evals_gibbs = median_evals(gibbs);
  s.median_evals_blocked = median_evals(blocked);
  return s;
}

namespace {

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json();
}

}  // namespace

oracle::ToyModel sampler_order_toy() {
  oracle::ToyModel toy;
  toy.prior_mean = Vector::Constant(1, 0.0);
  toy.prior_variance = 1.0;
  toy.base_operator = Matrix::Constant(1, 1, 1.0);
  toy.sigma_y = 0.5;
  toy.sigmas = {0.0, 0.5, 1.0};
  toy.phi_mean = 1.0;
  toy.phi_variance = 0.25;
  toy.y = Vector::Constant(1, 0.8);
  return toy;
}

oracle::ToyModel toy_from_json(const nlohmann::json& doc) {
  oracle::ToyModel toy = sampler_order_toy();
  auto vec = [](const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
  };
  if (doc.contains("prior_mean")) toy.prior_mean = vec(doc["prior_mean"]);
  toy.prior_variance = doc.value("prior_variance", toy.prior_variance);
  if (doc.contains("operator")) {
    const auto rows = doc["operator"].get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw std::invalid_argument("toy.operator: empty matrix");
    toy.base_operator.resize(static_cast<Index>(rows.size()),
                             static_cast<Index>(rows[0].size()));
    for (size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows[0].size()) {
        throw std::invalid_argument("toy.operator: ragged matrix");
      }
      for (size_t c = 0; c < rows[r].size(); ++c) {
        toy.base_operator(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
      }
    }
  }
  toy.sigma_y = doc.value("sigma_y", toy.sigma_y);
  if (doc.contains("sigmas")) toy.sigmas = doc["sigmas"].get<std::vector<double>>();
  toy.phi_mean = doc.value("phi_mean", toy.phi_mean);
  toy.phi_variance = doc.value("phi_variance", toy.phi_variance);
  toy.phi_known = doc.value("phi_known", toy.phi_known);
  if (doc.contains("y")) toy.y = vec(doc["y"]);
  toy.validate();
  return toy;
}

nlohmann::json toy_to_json(const oracle::ToyModel& toy) {
  std::vector<std::vector<double>> rows;
  for (Index r = 0; r < toy.base_operator.rows(); ++r) {
    rows.emplace_back();
    for (Index c = 0; c < toy.base_operator.cols(); ++c) {
      rows.back().push_back(toy.base_operator(r, c));
    }
  }
  return {{"prior_mean", std::vector<double>(toy.prior_mean.data(),
                                             toy.prior_mean.data() + toy.prior_mean.size())},
          {"prior_variance", toy.prior_variance},
          {"operator", rows},
          {"sigma_y", toy.sigma_y},
          {"sigmas", toy.sigmas},
          {"phi_mean", toy.phi_mean},
          {"phi_variance", toy.phi_variance},
          {"phi_known", toy.phi_known},
          {"y", std::vector<double>(toy.y.data(), toy.y.data() + toy.y.size())}};
}

nlohmann::json outcome_to_json(const SeedOutcome& o) {
  return {{"seed", o.seed},
          {"init_kernel_error", o.init_kernel_error},
          {"kernel_error", finite_or_null(o.kernel_error)},
          {"psnr_blind", finite_or_null(o.psnr_blind)},
          {"psnr_blind_aligned", finite_or_null(o.psnr_blind_aligned)},
          {"psnr_pinv", finite_or_null(o.psnr_pinv)},
          {"psnr_nonblind", finite_or_null(o.psnr_nonblind)},
          {"evals_gibbs", o.evals_gibbs},
          {"evals_blocked", o.evals_blocked},
          {"recovered", o.recovered()}};
}

nlohmann::json summary_to_json(const BenchmarkSummary& s) {
  return {{"seeds", s.seeds},
          {"recovery_rate", s.recovery_rate},
          {"upper_bound_rate", s.upper_bound_rate},
          {"median_evals_gibbs", finite_or_null(s.median_evals_gibbs)},
          {"median_evals_blocked", finite_or_null(s.median_evals_blocked)}};
}

}  // namespace gibbsddrm::calibration
