#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gibbsddrm/oracle.hpp"

#include <cmath>
#include <functional>

using namespace gibbsddrm;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Composite Simpson over a box, 1-D or 2-D; returns (integral of f,
// integral of x f) for f the unnormalized posterior density.
Vector simpson_posterior_mean(const std::function<double(const Vector&)>& density,
                              const std::vector<std::pair<double, double>>& box, int n) {
  const Index d = static_cast<Index>(box.size());
  auto weight = [n](int k) { return (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0); };
  double z = 0.0;
  Vector acc = Vector::Zero(d);
  Vector x(d);
  const int outer = d == 2 ? n : 0;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= outer; ++j) {
      x(0) = box[0].first + (box[0].second - box[0].first) * i / n;
      double w = weight(i);
      if (d == 2) {
        x(1) = box[1].first + (box[1].second - box[1].first) * j / n;
        w *= weight(j);
      }
      const double p = w * density(x);
      z += p;
      acc += p * x;
    }
  }
  return acc / z;
}

double log_gmm_posterior(const GmmPrior& prior, const Matrix& h, const Vector& y,
                         double sigma_y, const Vector& x) {
  double mix = 0.0;
  for (Index k = 0; k < prior.components(); ++k) {
    mix += prior.weights()(k) *
           std::exp(-0.5 * (x - prior.means().row(k).transpose()).squaredNorm() /
                    prior.variance());
  }
  return std::log(mix) - 0.5 * (y - h * x).squaredNorm() / (sigma_y * sigma_y);
}

GmmPrior random_gmm(Index d, Rng& rng) {
  const int k = 1 + static_cast<int>(3 * rng.uniform());
  Vector w = (rng.normal_vector(k).array().abs() + 0.2).matrix();
  w /= w.sum();
  Matrix means(k, d);
  for (Index i = 0; i < means.size(); ++i) means(i) = 1.5 * rng.normal();
  return GmmPrior(w, means, 0.05 + 0.5 * rng.uniform());
}

}  // namespace

TEST_CASE("conjugate posterior examples") {
  const GaussianPrior prior(1, 0.0, 1.0);
  const oracle::GaussianMoments m = oracle::exact_gaussian_posterior(
      prior, DenseOperator(Matrix::Identity(1, 1)), vec({2.0}), 1.0);
  CHECK(m.mean(0) == doctest::Approx(1.0));
  CHECK(m.covariance(0, 0) == doctest::Approx(0.5));

  const GaussianPrior shifted(vec({0.7, -0.3}), 2.0);
  const oracle::GaussianMoments vague = oracle::exact_gaussian_posterior(
      shifted, DenseOperator(Matrix::Identity(2, 2)), vec({50.0, 9.0}), 1e6);
  CHECK((vague.mean - shifted.mean()).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("conjugate posterior matches grid quadrature") {
  Rng rng(51);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix h(2, 2);
    for (Index i = 0; i < 4; ++i) h(i) = rng.normal();
    h += 1.5 * Matrix::Identity(2, 2);
    const GaussianPrior prior(rng.normal_vector(2), 0.5 + rng.uniform());
    const double sigma_y = 0.5 + rng.uniform();
    const Vector y = rng.normal_vector(2);
    const oracle::GaussianMoments m =
        oracle::exact_gaussian_posterior(prior, DenseOperator(h), y, sigma_y);
    auto density = [&](const Vector& x) {
      return std::exp(-0.5 * (x - prior.mean()).squaredNorm() / prior.variance() -
                      0.5 * (y - h * x).squaredNorm() / (sigma_y * sigma_y));
    };
    std::vector<std::pair<double, double>> box;
    for (Index i = 0; i < 2; ++i) {
      const double sd = std::sqrt(m.covariance(i, i));
      box.push_back({m.mean(i) - 10 * sd, m.mean(i) + 10 * sd});
    }
    CHECK((simpson_posterior_mean(density, box, 400) - m.mean).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("posterior rejects a non-positive noise level") {
  const GaussianPrior prior(1, 0.0, 1.0);
  CHECK_THROWS(oracle::exact_gaussian_posterior(prior, DenseOperator(Matrix::Identity(1, 1)),
                                                vec({1.0}), 0.0));
}

TEST_CASE("quadrature mean agrees with an independent integrator") {
  struct Case {
    GmmPrior prior;
    Vector x;
    double sigma;
  };
  Matrix one(1, 1);
  one << 0.4;
  Matrix sym(2, 1);
  sym << -1.5, 1.5;
  Matrix pair(2, 1);
  pair << -2.0, 2.0;
  const std::vector<Case> cases{
      {GmmPrior(vec({1.0}), one, 0.3), vec({1.2}), 0.5},
      {GmmPrior(vec({0.5, 0.5}), sym, 0.2), vec({0.0}), 0.7},
      {GmmPrior(vec({0.5, 0.5}), pair, 0.25), vec({1.0}), 1.0},
  };
  const DenseOperator id(Matrix::Identity(1, 1));
  for (const Case& c : cases) {
    const auto grid = oracle::denoiser_grid(c.prior, c.x, c.sigma, 2001);
    const oracle::QuadratureResult q =
        oracle::quadrature_posterior_mean(c.prior, id, c.x, c.sigma, grid);
    CHECK_FALSE(q.warning);
    auto density = [&](const Vector& x) {
      return std::exp(log_gmm_posterior(c.prior, Matrix::Identity(1, 1), c.x, c.sigma, x));
    };
    const Vector ref = simpson_posterior_mean(density, {{-8.0, 8.0}}, 4000);
    CHECK(std::abs(q.mean(0) - ref(0)) < 1e-4);
  }
  // The symmetric case is exactly zero.
  CHECK(std::abs(oracle::quadrature_denoise(cases[1].prior, vec({0.0}), 0.7).mean(0)) < 1e-12);
}

TEST_CASE("quadrature flags a coarse grid") {
  Matrix means(2, 1);
  means << -2.0, 2.0;
  const GmmPrior prior(vec({0.5, 0.5}), means, 0.01);
  const oracle::QuadratureResult q = oracle::quadrature_posterior_mean(
      prior, DenseOperator(Matrix::Identity(1, 1)), vec({0.5}), 0.05, {{-5.0, 5.0, 9}});
  CHECK(q.warning);
  CHECK_FALSE(q.message.empty());
}

TEST_CASE("mixture denoiser matches quadrature on random cases") {
  Rng rng(52);
  for (int trial = 0; trial < 100; ++trial) {
    const Index d = 1 + trial % 2;
    const GmmPrior prior = random_gmm(d, rng);
    const double sigma = 0.1 + 1.5 * rng.uniform();
    const Vector x = prior.sample(rng) + sigma * rng.normal_vector(d);
    const oracle::QuadratureResult q =
        oracle::quadrature_denoise(prior, x, sigma, d == 1 ? 4001 : 801);
    const Vector got = prior.estimate(x, sigma);
    CAPTURE(trial);
    CHECK_FALSE(q.warning);
    CHECK((got - q.mean).norm() <= 1e-6 * std::max(q.mean.norm(), 1.0));
  }
}

TEST_CASE("total variation examples") {
  Rng rng(53);
  const Vector a = rng.normal_vector(1000);
  CHECK(oracle::tv_distance(a, a, oracle::Binning::uniform(-4, 4, 50)) == 0.0);
  const Vector low = Vector::Constant(500, -1.0);
  const Vector high = Vector::Constant(300, 1.0);
  CHECK(oracle::tv_distance(low, high, oracle::Binning::uniform(-2, 2, 10)) == 1.0);

  const Vector b = rng.normal_vector(100000);
  const Vector c = rng.normal_vector(100000);
  CHECK(oracle::tv_distance(b, c, oracle::Binning::uniform(-4, 4, 50)) < 0.02);

  CHECK_THROWS_AS(oracle::tv_distance(Vector(), c, oracle::Binning::uniform(-1, 1, 5)),
                  std::invalid_argument);
}

TEST_CASE("joint total variation over two columns") {
  Rng rng(54);
  Matrix a(20000, 2), b(20000, 2);
  for (Index i = 0; i < a.rows(); ++i) {
    a.row(i) = rng.normal_vector(2).transpose();
    b.row(i) = rng.normal_vector(2).transpose();
  }
  const double same = oracle::tv_distance(a, b, oracle::Binning::covering(a, b, 10));
  CHECK(same < 0.05);
  Matrix shifted = b;
  shifted.col(1).array() += 3.0;
  CHECK(oracle::tv_distance(a, shifted, oracle::Binning::covering(a, shifted, 10)) > 0.8);
}

TEST_CASE("gaussian conditioning") {
  Matrix cov(2, 2);
  cov << 2.0, 0.6, 0.6, 1.0;
  const oracle::GaussianMoments m =
      oracle::condition_gaussian(vec({1.0, -1.0}), cov, {0}, {1}, vec({0.5}));
  CHECK(m.mean(0) == doctest::Approx(1.0 + 0.6 * 1.5));
  CHECK(m.covariance(0, 0) == doctest::Approx(2.0 - 0.36));
}

TEST_CASE("grid sampler reproduces a known density") {
  Rng rng(55);
  const int n = 50000;
  Vector draws(n);
  auto log_density = [](double v) { return -0.5 * (v - 1.0) * (v - 1.0) / 0.25; };
  for (int i = 0; i < n; ++i) draws(i) = oracle::sample_on_grid(log_density, -3, 5, 2049, rng);
  CHECK(draws.mean() == doctest::Approx(1.0).epsilon(0.01));
  CHECK((draws.array() - draws.mean()).square().mean() == doctest::Approx(0.25).epsilon(0.03));
}

TEST_CASE("toy posterior draws agree with the known-phi conjugate posterior") {
  oracle::ToyModel toy;
  toy.prior_mean = vec({0.2, -0.1});
  toy.prior_variance = 1.0;
  toy.base_operator = Matrix::Identity(2, 2);
  toy.sigma_y = 0.5;
  toy.sigmas = {0.0, 1.0};
  toy.phi_mean = 1.3;
  toy.phi_known = true;
  toy.y = vec({1.0, 0.4});
  const oracle::GaussianMoments post = toy.x0_posterior(1.3);
  const oracle::GaussianMoments direct = oracle::exact_gaussian_posterior(
      GaussianPrior(toy.prior_mean, 1.0), DenseOperator(1.3 * Matrix::Identity(2, 2)), toy.y, 0.5);
  CHECK((post.mean - direct.mean).norm() < 1e-12);
  CHECK((post.covariance - direct.covariance).norm() < 1e-12);

  Rng rng(56);
  const Matrix draws = oracle::sample_toy_posterior(toy, 40000, rng);
  CHECK(draws.cols() == 3);
  CHECK((draws.col(2).array() == 1.3).all());
  for (Index i = 0; i < 2; ++i) {
    const double se = std::sqrt(post.covariance(i, i) / draws.rows());
    CHECK(std::abs(draws.col(i).mean() - post.mean(i)) < 4 * se);
  }
}

TEST_CASE("toy model validation") {
  oracle::ToyModel toy;
  toy.prior_mean = vec({0.0, 0.0, 0.0});
  toy.base_operator = Matrix::Identity(3, 3);
  toy.sigmas = {0.0, 1.0};
  toy.y = vec({0, 0, 0});
  CHECK_THROWS_AS(toy.validate(), std::invalid_argument);
}
