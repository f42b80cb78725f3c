#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gibbsddrm/oracle.hpp"
#include "gibbsddrm/phi_sampler.hpp"

#include <cmath>
#include <numbers>

using namespace gibbsddrm;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

LangevinConfig langevin(double xi, int steps, double noise, PhiPrior prior = PhiPrior::flat()) {
  LangevinConfig c;
  c.step_size = xi;
  c.n_steps = steps;
  c.noise_scale = noise;
  c.prior = prior;
  return c;
}

double log_target(const SpectralOperator& op, const Vector& x, const Vector& y, double sigma_y,
                  const PhiPrior& prior) {
  return -(y - op.apply(x)).squaredNorm() / (2 * sigma_y * sigma_y) +
         prior.log_density(op.params());
}

}  // namespace

TEST_CASE("prior scores") {
  const Vector phi = vec({0.3, -0.1, 0.0});
  CHECK(PhiPrior::flat().score(phi) == Vector::Zero(3));
  CHECK(PhiPrior::laplace(2.0).score(phi) == vec({-2.0, 2.0, 0.0}));
  CHECK(PhiPrior::gaussian(2.0).score(phi) == vec({-0.6, 0.2, 0.0}));
  CHECK_THROWS_AS(PhiPrior::laplace(0.0), std::invalid_argument);
  CHECK_THROWS_AS(PhiPrior::gaussian(-1.0), std::invalid_argument);
}

TEST_CASE("score at zero residual") {
  const CirculantConvolution1d op(4, vec({0.3, -0.1}));
  const Vector x = vec({1.0, 2.0, -1.0, 0.5});
  const Vector y = op.apply(x);
  CHECK(conditional_score_phi(op, x, y, 0.1, PhiPrior::flat()).norm() < 1e-12);
  const Vector s = conditional_score_phi(op, x, y, 0.1, PhiPrior::laplace(0.7));
  CHECK(s(0) == doctest::Approx(-0.7));
  CHECK(s(1) == doctest::Approx(0.7));
  CHECK_THROWS_AS(conditional_score_phi(op, x, y, 0.0, PhiPrior::flat()), std::invalid_argument);
}

TEST_CASE("score matches finite differences of the log target") {
  Rng rng(31);
  const PhiPrior priors[] = {PhiPrior::flat(), PhiPrior::gaussian(3.0), PhiPrior::laplace(0.5)};
  for (int trial = 0; trial < 20; ++trial) {
    for (const PhiPrior& prior : priors) {
      CirculantConvolution1d op(10, rng.normal_vector(4));
      const Vector x = rng.normal_vector(10);
      const Vector y = rng.normal_vector(10);
      const double sigma_y = 0.2 + rng.uniform();
      const Vector phi = op.params();
      const Vector g = conditional_score_phi(op, x, y, sigma_y, prior);
      Vector fd(phi.size());
      const double h = 1e-6;
      for (Index i = 0; i < phi.size(); ++i) {
        Vector p = phi;
        p(i) += h;
        op.set_params(p);
        const double up = log_target(op, x, y, sigma_y, prior);
        p(i) -= 2 * h;
        op.set_params(p);
        fd(i) = (up - log_target(op, x, y, sigma_y, prior)) / (2 * h);
      }
      op.set_params(phi);
      CHECK((g - fd).norm() / fd.norm() < 1e-5);
    }
  }
}

TEST_CASE("score is additive in the prior") {
  Rng rng(32);
  const CirculantConvolution1d op(6, rng.normal_vector(3));
  const Vector x = rng.normal_vector(6);
  const Vector y = rng.normal_vector(6);
  for (const PhiPrior& prior : {PhiPrior::gaussian(1.5), PhiPrior::laplace(0.2)}) {
    CHECK(conditional_score_phi(op, x, y, 0.5, PhiPrior::flat()) + prior.score(op.params()) ==
          conditional_score_phi(op, x, y, 0.5, prior));
  }
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(langevin(0.0, 1, 1).validate(), std::invalid_argument);
  CHECK_THROWS_AS(langevin(1e-3, 0, 1).validate(), std::invalid_argument);
  CHECK_THROWS_AS(langevin(1e-3, 1, 0.5).validate(), std::invalid_argument);
  CHECK_NOTHROW(langevin(1e-3, 1, 0).validate());
}

TEST_CASE("deterministic step with zero score leaves phi alone") {
  CirculantConvolution1d op(4, vec({0.4, 0.6}));
  Rng rng(1);
  const Vector out =
      langevin_step(op, Vector::Zero(4), Vector::Zero(4), 1.0, langevin(0.5, 1, 0), rng);
  CHECK(out == vec({0.4, 0.6}));
  CHECK(op.params() == vec({0.4, 0.6}));
}

TEST_CASE("noise-only step has variance xi") {
  const Vector phi0 = vec({0.1, 0.2, 0.3});
  CirculantConvolution1d op(8, phi0);
  const LangevinConfig c = langevin(4.0, 1, 1);
  Rng rng(33);
  const int n = 100000;
  for (Index i = 0; i < 3; ++i) {
    Vector d(n);
    for (int k = 0; k < n; ++k) {
      op.set_params(phi0);
      d(k) = (langevin_step(op, Vector::Zero(8), Vector::Zero(8), 1.0, c, rng) - phi0)(i);
    }
    const double mean = d.mean();
    const Vector sq = (d.array() - mean).square().matrix();
    const double var = sq.mean();
    const double var_se = std::sqrt((sq.array() - var).square().mean() / n);
    CHECK(std::abs(mean) <= 3 * std::sqrt(4.0 / n));
    CHECK(std::abs(var - 4.0) <= 3 * var_se);
  }
}

TEST_CASE("MAP variant is plain gradient ascent") {
  Rng rng(34);
  CirculantConvolution1d op(8, rng.normal_vector(3));
  CirculantConvolution1d ref = op;
  const Vector x = rng.normal_vector(8);
  const Vector y = rng.normal_vector(8);
  const LangevinConfig c = langevin(1e-3, 1, 0, PhiPrior::laplace(0.1));
  Rng unused(0);
  for (int i = 0; i < 25; ++i) {
    langevin_step(op, x, y, 0.7, c, unused);
    const Vector grad = conditional_score_phi(ref, x, y, 0.7, PhiPrior::laplace(0.1));
    ref.set_params(ref.params() + (1e-3 / 2.0) * grad);
    CHECK(op.params() == ref.params());
  }
}

TEST_CASE("one-step sample_phi is one langevin step on the denoised latent") {
  Rng gen(35);
  const GaussianPrior prior(6, 0.2, 0.5);
  const NoiseSchedule schedule = make_linear_schedule(4, 1.0);
  const LatentState latent{2, gen.normal_vector(6)};
  const Vector y = gen.normal_vector(6);
  CirculantConvolution1d a(6, vec({0.5, 0.5}));
  CirculantConvolution1d b = a;
  Rng ra(7), rb(7);
  const LangevinConfig c = langevin(1e-2, 1, 1);
  sample_phi(a, latent, schedule, prior, y, 0.3, c, ra);
  langevin_step(b, prior.estimate(latent.x, schedule.sigma(2)), y, 0.3, c, rb);
  CHECK(a.params() == b.params());
}

TEST_CASE("Langevin chain matches a conjugate posterior") {
  // y = phi * x + N(0, 1), phi ~ N(0, 1): posterior precision 1 + x^2.
  const double x = 2.0, y0 = 3.0, lambda = 1.0;
  const double prec = lambda + x * x;
  const double mean = x * y0 / prec, var = 1.0 / prec;
  DenseOperator op(Matrix::Constant(1, 1, 0.0));
  const LangevinConfig c = langevin(0.02, 1, 1, PhiPrior::gaussian(lambda));
  Rng rng(36);
  for (int i = 0; i < 2000; ++i) langevin_step(op, vec({x}), vec({y0}), 1.0, c, rng);
  const int n = 400000;
  Vector draws(n);
  for (int i = 0; i < n; ++i) {
    draws(i) = langevin_step(op, vec({x}), vec({y0}), 1.0, c, rng)(0);
  }
  const double sd = std::sqrt(var);
  const int bins = 30;
  // Exact bin masses from the normal CDF.
  const double width = 8 * sd / bins;
  Vector mass(bins);
  auto cdf = [&](double v) { return 0.5 * std::erfc(-(v - mean) / (sd * std::sqrt(2.0))); };
  for (int b = 0; b < bins; ++b) {
    const double lo = mean - 4 * sd + b * width;
    mass(b) = cdf(lo + width) - cdf(lo);
  }
  mass(0) += cdf(mean - 4 * sd);
  mass(bins - 1) += 1 - cdf(mean + 4 * sd);
  Vector counts = Vector::Zero(bins);
  for (int i = 0; i < n; ++i) {
    const int b = std::clamp(static_cast<int>(std::floor((draws(i) - (mean - 4 * sd)) / width)),
                             0, bins - 1);
    counts(b) += 1;
  }
  const double tv = 0.5 * (counts / n - mass).cwiseAbs().sum();
  CHECK(tv < 0.05);
}

TEST_CASE("MAP updates recover a scale parameter") {
  // H_phi = phi I through a one-tap kernel, noiseless y = phi* xhat.
  Rng gen(37);
  const Vector x_hat = gen.normal_vector(8);
  const double phi_star = 1.7;
  const Vector y = phi_star * x_hat;
  CirculantConvolution1d op(8, vec({0.3}));
  const GaussianPrior denoiser(8, 0.0, 1.0);
  const NoiseSchedule schedule = make_linear_schedule(3, 1.0);
  // sigma_0 = 0, so the denoiser hands back x_hat itself.
  const LatentState latent{0, x_hat};
  const LangevinConfig c = langevin(1.0 / x_hat.squaredNorm(), 200, 0);
  Rng rng(0);
  sample_phi(op, latent, schedule, denoiser, y, 1.0, c, rng);
  CHECK(std::abs(op.params()(0) - phi_star) < 1e-3);
}

TEST_CASE("kernel error falls over a Langevin run") {
  const Index n = 32;
  const double sigma_y = 0.02;
  LangevinConfig c = langevin(2e-6, 50, 1);
  c.project_to_simplex = true;
  const GaussianPrior denoiser(n, 0.5, 0.1);
  const NoiseSchedule schedule = make_linear_schedule(2, 1.0);
  Rng gen(38);
  int decreased = 0;
  const int trials = 50;
  for (int trial = 0; trial < trials; ++trial) {
    const Vector truth = project_kernel_simplex(gen.normal_vector(5).cwiseAbs());
    const Vector x = denoiser.sample(gen);
    const CirculantConvolution1d true_op(n, truth);
    const Vector y = true_op.apply(x) + sigma_y * gen.normal_vector(n);
    CirculantConvolution1d op(n, project_kernel_simplex(truth + 0.15 * gen.normal_vector(5)));
    const double before = (op.params() - truth).norm() / truth.norm();
    Rng rng = gen.split();
    sample_phi(op, LatentState{0, x}, schedule, denoiser, y, sigma_y, c, rng);
    const double after = (op.params() - truth).norm() / truth.norm();
    decreased += after < before;
  }
  CHECK(decreased >= 0.9 * trials);
}

TEST_CASE("bound constant") {
  CHECK(std::abs(jensen_gap_bound(1.0, 1, 1.0, 1.0) -
                 std::exp(-0.5) / std::sqrt(2 * std::numbers::pi)) < 1e-12);
  CHECK(jensen_gap_bound(1.0, 1, 1.0, 1.0) == doctest::Approx(0.24197).epsilon(1e-5));
  CHECK(jensen_gap_bound(0.3, 2, 4.0, 0.0) == 0.0);
  CHECK((JensenGapBound{0.5, 2, 1.5, 0.2}.value()) == jensen_gap_bound(0.5, 2, 1.5, 0.2));
  CHECK_THROWS_AS(jensen_gap_bound(0.0, 1, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(jensen_gap_bound(-1.0, 1, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("bound monotonicity on grids") {
  const std::vector<double> grid{0.05, 0.1, 0.3, 0.7, 1.0, 2.0, 5.0};
  for (Index dy : {1, 2, 3}) {
    for (size_t i = 0; i + 1 < grid.size(); ++i) {
      for (double other : grid) {
        CHECK(jensen_gap_bound(1.0, dy, grid[i], other) <
              jensen_gap_bound(1.0, dy, grid[i + 1], other));
        CHECK(jensen_gap_bound(1.0, dy, other, grid[i]) <
              jensen_gap_bound(1.0, dy, other, grid[i + 1]));
        CHECK(jensen_gap_bound(grid[i], dy, other, 1.0) >
              jensen_gap_bound(grid[i + 1], dy, other, 1.0));
      }
    }
  }
}

TEST_CASE("Monte Carlo Jensen gap stays under the bound") {
  Rng rng(39);
  for (int trial = 0; trial < 1000; ++trial) {
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
    const oracle::JensenGapEstimate est =
        oracle::estimate_jensen_gap(prior, op, y, sigma_y, x_t, sigma_t, x_hat, 200, rng);
    CHECK(est.gap <= jensen_gap_bound(sigma_y, d, est.s1, est.m1));
  }
}
