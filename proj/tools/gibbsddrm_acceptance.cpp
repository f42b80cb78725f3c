// Acceptance suite: one PASS/FAIL line per criterion, every tolerance pinned
// here. Exit status is 0 when every criterion passes, apart from those named
// with --known-failure (still printed as FAIL).

#include "gibbsddrm/bench.hpp"
#include "gibbsddrm/calibration.hpp"
#include "gibbsddrm/io.hpp"
#include "gibbsddrm/operators.hpp"
#include "gibbsddrm/oracle.hpp"
#include "gibbsddrm/pcgs.hpp"
#include "gibbsddrm/phi_sampler.hpp"
#include "gibbsddrm/reference_samplers.hpp"

#include <CLI11.hpp>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

using namespace gibbsddrm;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kSpectralTol = 1e-8;
constexpr double kSpectralSeconds = 1.0;
constexpr int kGradientInstances = 100;
constexpr double kGradientRelTol = 1e-5;
constexpr double kGradientSeconds = 10.0;
constexpr int kDenoiserCases = 100;
constexpr double kDenoiserRelTol = 1e-6;
constexpr double kDenoiserSeconds = 30.0;
constexpr int kFidelityRuns = 2000;
constexpr int kFidelityMeasurements = 5;
constexpr double kFidelitySeconds = 120.0;
constexpr int kToySweeps = 100000;
constexpr int kToyBins = 40;
constexpr double kToyTv = 0.05;
constexpr double kToySeconds = 120.0;
constexpr int kJensenConfigs = 1000;
constexpr int kJensenDraws = 200;
constexpr double kBoundConstantTol = 1e-12;
constexpr double kJensenSeconds = 60.0;
constexpr int kBenchmarkSeeds = 50;
constexpr double kRecoveryRate = 0.80;
constexpr double kUpperBoundRate = 0.90;
constexpr double kBenchmarkSeconds = 600.0;
constexpr int kEfficiencySeeds = 20;
constexpr double kEfficiencySeconds = 900.0;
constexpr int kIdentitySeeds = 5;
constexpr double kIdentitySeconds = 10.0;
constexpr double kFormatSeconds = 60.0;

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

fs::path source_dir() { return GIBBSDDRM_SOURCE_DIR; }

bench::ExperimentConfig benchmark_config() {
  return bench::load_config(source_dir() / "configs" / "benchmark_1d.json");
}

std::vector<std::uint64_t> seeds_upto(int n) {
  std::vector<std::uint64_t> s(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) s[static_cast<size_t>(i)] = static_cast<std::uint64_t>(i + 1);
  return s;
}

unsigned threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// 1. Every circulant operator with d <= 16 against a dense SVD of its matrix.
Outcome spectral(Rng& rng) {
  std::vector<std::unique_ptr<SpectralOperator>> ops;
  for (Index n = 1; n <= 16; ++n) {
    const Index taps = 1 + static_cast<Index>(rng.uniform() * static_cast<double>(n));
    ops.push_back(std::make_unique<CirculantConvolution1d>(n, rng.normal_vector(taps)));
  }
  for (Index h = 2; h <= 4; ++h) {
    for (Index w = 2; h * w <= 16; ++w) {
      ops.push_back(std::make_unique<CirculantConvolution2d>(
          h, w, std::min<Index>(h, 2), std::min<Index>(w, 3),
          rng.normal_vector(std::min<Index>(h, 2) * std::min<Index>(w, 3))));
    }
  }
  double worst = 0.0;
  for (const auto& op : ops) {
    const Matrix dense = op->to_matrix();
    const Index n = dense.cols();
    Eigen::JacobiSVD<Matrix> svd(dense, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector ref = svd.singularValues();
    worst = std::max(worst, (op->singular_values() - ref).cwiseAbs().maxCoeff());

    // H = U diag(s) V^H with the operator's own factors.
    const SvdFactors f = op->svd_factors();
    const CMatrix rebuilt = f.u * f.s.cast<Complex>().asDiagonal() * f.v.adjoint();
    worst = std::max(worst, (rebuilt - dense.cast<Complex>()).cwiseAbs().maxCoeff());

    // Transforms: V^H x, and the pseudo-inverse read back through V.
    const Vector x = rng.normal_vector(n);
    const Vector y = rng.normal_vector(n);
    const CVector xbar = op->to_spectral_data(x);
    worst = std::max(worst, (xbar - f.v.adjoint() * x.cast<Complex>()).cwiseAbs().maxCoeff());
    Vector inv_s = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) {
      if (ref(i) > kZeroGainRelTol * ref(0)) inv_s(i) = 1.0 / ref(i);
    }
    const Vector pinv_ref =
        svd.matrixV() * inv_s.asDiagonal() * svd.matrixU().transpose() * y;
    const Vector pinv = op->from_spectral_data(op->to_spectral_measurement(y));
    worst = std::max(worst, (pinv - pinv_ref).cwiseAbs().maxCoeff() /
                                std::max(1.0, pinv_ref.cwiseAbs().maxCoeff()));
  }
  return {worst <= kSpectralTol,
          std::to_string(ops.size()) + " operators, max deviation " + fmt(worst) +
              " (tol " + fmt(kSpectralTol) + ")"};
}

// 2. Likelihood gradient against central differences.
double log_lik(const SpectralOperator& op, const Vector& x, const Vector& y, double sigma_y) {
  return -(y - op.apply(x)).squaredNorm() / (2 * sigma_y * sigma_y);
}

Outcome gradient(Rng& rng) {
  double worst = 0.0;
  int count = 0;
  for (int i = 0; i < kGradientInstances; ++i) {
    std::unique_ptr<SpectralOperator> op;
    switch (i % 4) {
      case 0: op = std::make_unique<DenseOperator>(Matrix::Random(3, 4)); break;
      case 1:
        op = std::make_unique<CirculantConvolution1d>(9, rng.normal_vector(4));
        break;
      case 2:
        op = std::make_unique<CirculantConvolution2d>(4, 5, 2, 3, rng.normal_vector(6));
        break;
      default:
        op = std::make_unique<ComplexCirculantConvolution1d>(6, rng.normal_vector(6));
    }
    const Vector x = rng.normal_vector(op->input_dim());
    const Vector y = rng.normal_vector(op->output_dim());
    const double sigma_y = 0.1 + rng.uniform();
    const Vector phi = op->params();
    const Vector g = op->datafit_grad(x, y, sigma_y);
    Vector fd(phi.size());
    const double h = 1e-6;
    for (Index k = 0; k < phi.size(); ++k) {
      Vector p = phi;
      p(k) += h;
      op->set_params(p);
      const double up = log_lik(*op, x, y, sigma_y);
      p(k) -= 2 * h;
      op->set_params(p);
      fd(k) = (up - log_lik(*op, x, y, sigma_y)) / (2 * h);
    }
    worst = std::max(worst, (g - fd).norm() / std::max(fd.norm(), 1e-12));
    ++count;
  }
  return {worst < kGradientRelTol, std::to_string(count) + " instances over 4 variants, max rel " +
                                       fmt(worst) + " (tol " + fmt(kGradientRelTol) + ")"};
}

// 3. Mixture denoiser against quadrature.
Outcome denoiser(Rng& rng) {
  double worst = 0.0;
  int warnings = 0;
  for (int trial = 0; trial < kDenoiserCases; ++trial) {
    const Index d = 1 + trial % 2;
    const int k = 1 + static_cast<int>(3 * rng.uniform());
    Vector w = (rng.normal_vector(k).array().abs() + 0.2).matrix();
    w /= w.sum();
    Matrix means(k, d);
    for (Index i = 0; i < means.size(); ++i) means(i) = 1.5 * rng.normal();
    const GmmPrior prior(w, means, 0.05 + 0.5 * rng.uniform());
    const double sigma = 0.1 + 1.5 * rng.uniform();
    const Vector x = prior.sample(rng) + sigma * rng.normal_vector(d);
    const oracle::QuadratureResult q =
        oracle::quadrature_denoise(prior, x, sigma, d == 1 ? 4001 : 801);
    if (q.warning) ++warnings;
    const double rel = (prior.estimate(x, sigma) - q.mean).norm() / std::max(q.mean.norm(), 1.0);
    worst = std::max(worst, rel);
  }
  return {worst <= kDenoiserRelTol && warnings == 0,
          std::to_string(kDenoiserCases) + " cases, d <= 2, max rel " + fmt(worst) + " (tol " +
              fmt(kDenoiserRelTol) + "), grid warnings " + std::to_string(warnings)};
}

// 4. Average of non-blind DDRM runs versus the exact posterior mean.
Outcome fidelity() {
  const nlohmann::json committed = io::read_json(source_dir() / "data" / "calibration.json");
  const double band = committed.at("ddrm_fidelity").at("band").get<double>();
  const auto results = bench::for_each_seed(
      seeds_upto(kFidelityMeasurements), threads(),
      [](std::uint64_t seed) { return calibration::ddrm_fidelity(kFidelityRuns, seed); });
  double worst = 0.0;
  for (const auto& r : results) worst = std::max(worst, r.relative_gap);
  const bool constant_ok = band == calibration::kFidelityBand;
  return {worst <= calibration::kFidelityBand && constant_ok,
          std::to_string(kFidelityMeasurements) + " measurements x " +
              std::to_string(kFidelityRuns) + " runs, worst gap " + fmt(worst) + " (band " +
              fmt(calibration::kFidelityBand) + (constant_ok ? "" : ", calibration file differs") +
              ")"};
}

// 5. Sampler 1 versus the PCGS ordering on the toy chain, plus the
// order-swap counterexample.
Outcome sampler_ordering() {
  const oracle::ToyModel toy = calibration::sampler_order_toy();
  Rng a(bench::sampler_seed(1));
  Rng b(bench::sampler_seed(2));
  const Matrix naive = run_reference_samplers(toy, ReferenceVariant::kSampler1, kToySweeps, a).x0_phi();
  const Matrix pcgs = run_reference_samplers(toy, ReferenceVariant::kPcgs, kToySweeps, b).x0_phi();
  double worst = 0.0;
  std::string per;
  for (Index c = 0; c < naive.cols(); ++c) {
    const Matrix ca = naive.col(c);
    const Matrix cb = pcgs.col(c);
    const double tv = oracle::tv_distance(ca, cb, oracle::Binning::covering(ca, cb, kToyBins));
    worst = std::max(worst, tv);
    per += (c + 1 == naive.cols() ? "phi " : "x0 ") + fmt(tv, 3) + " ";
  }

  const GibbsStep s1{"1", {"Y"}, {"W"}, {"X", "Z"}};
  const GibbsStep s2{"2", {"Z"}, {"W"}, {"X", "Y"}};
  const GibbsStep s3{"3", {"W"}, {}, {"X", "Y", "Z"}};
  const GibbsStep s4{"4", {"X"}, {}, {"W", "Y", "Z"}};
  bool valid_accepted = true;
  bool swap_rejected = false;
  try {
    validate_trimming({s1, s2, s3, s4});
  } catch (const TrimmingViolation&) {
    valid_accepted = false;
  }
  try {
    validate_trimming({s1, s2, s4, s3});
  } catch (const TrimmingViolation&) {
    swap_rejected = true;
  }
  return {worst < kToyTv && valid_accepted && swap_rejected,
          std::to_string(kToySweeps) + " sweeps, marginal TV " + per + "(tol " + fmt(kToyTv) +
              "); swap " + (swap_rejected ? "rejected" : "ACCEPTED") + ", valid order " +
              (valid_accepted ? "accepted" : "REJECTED")};
}

// 6. Jensen-gap bound.
Outcome jensen(Rng& rng) {
  const double constant = jensen_gap_bound(1.0, 1, 1.0, 1.0);
  const double want = std::exp(-0.5) / std::sqrt(2 * std::numbers::pi);
  const bool constant_ok = std::abs(constant - want) <= kBoundConstantTol;
  int held = 0;
  for (int trial = 0; trial < kJensenConfigs; ++trial) {
    const Index d = 1 + static_cast<Index>(2 * rng.uniform());
    const int k = 1 + static_cast<int>(3 * rng.uniform());
    Vector w = (rng.normal_vector(k).array().abs() + 0.1).matrix();
    w /= w.sum();
    Matrix means(k, d);
    for (Index i = 0; i < means.size(); ++i) means(i) = 2 * rng.normal();
    const GmmPrior prior(w, means, 0.05 + rng.uniform());
    Matrix h(d, d);
    for (Index i = 0; i < h.size(); ++i) h(i) = rng.normal();
    const DenseOperator op(h);
    const double sigma_y = 0.2 + rng.uniform();
    const double sigma_t = 0.05 + 2 * rng.uniform();
    const Vector x0 = prior.sample(rng);
    const Vector x_t = x0 + sigma_t * rng.normal_vector(d);
    const Vector y = h * x0 + sigma_y * rng.normal_vector(d);
    const Vector x_hat = prior.estimate(x_t, sigma_t);
    const oracle::JensenGapEstimate est = oracle::estimate_jensen_gap(
        prior, op, y, sigma_y, x_t, sigma_t, x_hat, kJensenDraws, rng);
    if (est.gap <= jensen_gap_bound(sigma_y, d, est.s1, est.m1)) ++held;
  }
  return {constant_ok && held == kJensenConfigs,
          "bound held in " + std::to_string(held) + "/" + std::to_string(kJensenConfigs) +
              " configs; constant " + fmt(constant, 17) + " vs " + fmt(want, 17)};
}

// Benchmark seeds 1..seeds; blocked Gibbs also runs on the first with_blocked.
std::vector<calibration::SeedOutcome> benchmark_runs(int seeds, int with_blocked) {
  const bench::ExperimentConfig config = benchmark_config();
  return bench::for_each_seed(seeds_upto(seeds), threads(), [&](std::uint64_t seed) {
    return calibration::run_benchmark_seed(config, seed,
                                           static_cast<int>(seed) <= with_blocked);
  });
}

Outcome recovery(const std::vector<calibration::SeedOutcome>& outcomes) {
  const calibration::BenchmarkSummary s = calibration::summarize(outcomes);
  const bool recovered = s.recovery_rate >= kRecoveryRate;
  const bool bounded = s.upper_bound_rate >= kUpperBoundRate;
  return {recovered && bounded,
          std::to_string(s.seeds) + " seeds: recovery " + fmt(s.recovery_rate) + " (need " +
              fmt(kRecoveryRate) + ") " + (recovered ? "ok" : "MISSED") +
              "; non-blind upper bound " + fmt(s.upper_bound_rate) + " (need " +
              fmt(kUpperBoundRate) + ") " + (bounded ? "ok" : "MISSED")};
}

Outcome efficiency(const std::vector<calibration::SeedOutcome>& outcomes) {
  const std::vector<calibration::SeedOutcome> first(
      outcomes.begin(),
      outcomes.begin() + std::min<std::ptrdiff_t>(kEfficiencySeeds,
                                                  static_cast<std::ptrdiff_t>(outcomes.size())));
  const calibration::BenchmarkSummary s = calibration::summarize(first);
  return {static_cast<int>(first.size()) == kEfficiencySeeds &&
              std::isfinite(s.median_evals_gibbs) &&
              s.median_evals_gibbs <= s.median_evals_blocked,
          std::to_string(first.size()) + " seeds, median evaluations to threshold: gibbsddrm " +
              fmt(s.median_evals_gibbs) + ", blocked " + fmt(s.median_evals_blocked)};
}

// 9. M_t = 0 everywhere against non-blind DDRM on the benchmark problems.
Outcome identity() {
  const bench::ExperimentConfig config = benchmark_config();
  const NoiseSchedule schedule = bench::build_schedule(config.schedule);
  int identical = 0;
  for (std::uint64_t seed = 1; seed <= kIdentitySeeds; ++seed) {
    const bench::Problem p = bench::generate_problem(config, seed);
    PcgsConfig pc = bench::build_pcgs_config(config, p.kernel_true);
    pc.inner = InnerCounts::zeros(schedule.steps());
    // Non-blind DDRM runs at the kernel the blind sampler starts from.
    Rng init_rng(seed);
    const Vector phi_init = pc.phi_init.initial_phi(*p.op, p.y, pc.langevin, init_rng);
    pc.phi_init = InitStrategy::fixed(phi_init);
    auto op_a = p.op->clone();
    auto op_b = p.op->clone();
    op_b->set_params(phi_init);
    Rng a(bench::sampler_seed(seed)), b(bench::sampler_seed(seed));
    const RestorationResult blind = run_gibbsddrm(*op_a, p.y, schedule, *p.prior, pc, a);
    const RestorationResult plain = run_ddrm(*op_b, p.y, schedule, pc.ddrm, *p.prior, b);
    bool same = blind.x0 == plain.x0 && blind.phi == phi_init &&
                blind.steps.size() == plain.steps.size();
    for (size_t i = 0; same && i < blind.steps.size(); ++i) {
      same = blind.steps[i].residual == plain.steps[i].residual;
    }
    if (same) ++identical;
  }
  return {identical == kIdentitySeeds,
          std::to_string(identical) + "/" + std::to_string(kIdentitySeeds) +
              " seeds bit-identical (x_0 and every step residual)"};
}

// 10. Determinism, round trips and schemas.
std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome formats(const fs::path& scratch) {
  std::vector<std::string> problems;
  fs::remove_all(scratch);
  const fs::path a = scratch / "a";
  const fs::path b = scratch / "b";

  std::vector<bench::ExperimentConfig> configs{benchmark_config()};
  bench::ExperimentConfig image = configs[0];
  image.problem.op = "conv2d";
  image.problem.height = 8;
  image.problem.width = 8;
  image.problem.kernel = bench::KernelSpec{};
  image.problem.kernel.type = "gaussian";
  image.problem.kernel.support_h = 3;
  image.problem.kernel.support = 3;
  image.prior.segments = 3;
  image.schedule.steps = 20;
  image.sampler.inner_switch = 10;
  image.sampler.langevin_steps = 5;
  bench::validate_config(image);
  configs.push_back(image);

  int runs = 0;
  for (size_t ci = 0; ci < configs.size(); ++ci) {
    const bench::ExperimentConfig& c = configs[ci];
    const std::string tag = c.problem.op;
    const bench::Problem pa = bench::generate_problem(c, 1);
    const bench::Problem pb = bench::generate_problem(c, 1);
    bench::write_problem(pa, c, a / tag);
    bench::write_problem(pb, c, b / tag);
    const bench::Problem back = bench::load_problem(a / tag);
    if (!(back.x_true == pa.x_true && back.y == pa.y && back.kernel_true == pa.kernel_true)) {
      problems.push_back(tag + " load round trip");
    }
    for (const std::string mode : {"gibbsddrm", "ddrm", "blocked", "pinv"}) {
      bench::write_run(bench::run_restoration(back, c, mode), c, back, a / tag);
      bench::write_run(bench::run_restoration(pb, c, mode), c, pb, b / tag);
      ++runs;
    }
    for (const auto& entry : fs::directory_iterator(a / tag)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("timing_", 0) == 0) continue;  // wall clock
      if (slurp(entry.path()) != slurp(b / tag / name)) problems.push_back(tag + "/" + name);
    }
  }

  const std::string cmd = "python3 \"" + (source_dir() / "tools" / "validate_json.py").string() +
                          "\" \"" + a.string() + "\" \"" +
                          (source_dir() / "data" / "calibration.json").string() +
                          "\" > \"" + (scratch / "validate.log").string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc != 0) problems.push_back("schema validation (see " + (scratch / "validate.log").string() + ")");

  std::string detail = std::to_string(runs) + " runs x 2 (1-D and 2-D), files byte-identical, " +
                       "round trips bit-exact, JSON schema-valid";
  if (!problems.empty()) {
    detail = "problems:";
    for (const auto& p : problems) detail += " " + p;
  }
  return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gibbsddrm acceptance criteria"};
  std::vector<int> known;
  std::vector<int> only;
  std::string scratch = (fs::temp_directory_path() / "gibbsddrm_acceptance").string();
  app.add_option("--known-failure", known,
                 "criterion whose FAIL does not affect the exit status (repeatable)");
  app.add_option("--only", only, "run just these criteria")->delimiter(',');
  app.add_option("--scratch", scratch, "working directory for criterion 10");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> known_set(known.begin(), known.end());
  auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

  int unexpected = 0;
  auto report = [&](int id, const std::string& name, double budget,
                    const std::function<Outcome()>& fn) {
    if (!wanted(id)) return;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    const bool in_time = secs < budget;
    const bool pass = o.pass && in_time;
    if (!pass && !known_set.count(id)) ++unexpected;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << " " << name << ": "
              << o.detail << "; " << fmt(secs, 3) << " s (limit " << fmt(budget) << " s)"
              << (in_time ? "" : " OVER TIME")
              << (!pass && known_set.count(id) ? " [known failure]" : "") << std::endl;
  };

  Rng rng(20260101);
  report(1, "spectral correctness", kSpectralSeconds, [&] { return spectral(rng); });
  report(2, "gradient correctness", kGradientSeconds, [&] { return gradient(rng); });
  report(3, "denoiser exactness", kDenoiserSeconds, [&] { return denoiser(rng); });
  report(4, "DDRM fidelity", kFidelitySeconds, [] { return fidelity(); });
  report(5, "sampler ordering and trimming", kToySeconds, [] { return sampler_ordering(); });
  report(6, "Jensen-gap bound", kJensenSeconds, [&] { return jensen(rng); });

  report(7, "blind recovery benchmark", kBenchmarkSeconds,
         [] { return recovery(benchmark_runs(kBenchmarkSeeds, 0)); });
  report(8, "convergence efficiency", kEfficiencySeconds,
         [] { return efficiency(benchmark_runs(kEfficiencySeeds, kEfficiencySeeds)); });
  report(9, "degenerate-mode identity", kIdentitySeconds, [] { return identity(); });
  report(10, "determinism and formats", kFormatSeconds,
         [&] { return formats(fs::path(scratch)); });
  return unexpected == 0 ? 0 : 1;
}
