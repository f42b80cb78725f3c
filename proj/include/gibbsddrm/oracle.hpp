#ifndef GIBBSDDRM_ORACLE_HPP_
#define GIBBSDDRM_ORACLE_HPP_

// Brute-force references. Nothing here may depend on the ddrm, phi_sampler
// or pcgs libraries; the build only links priors and operators.

#include "gibbsddrm/operators.hpp"
#include "gibbsddrm/priors.hpp"

#include <functional>
#include <string>
#include <vector>

namespace gibbsddrm::oracle {

struct GaussianMoments {
  Vector mean;
  Matrix covariance;
};

// Conjugate posterior of x_0 | y for x_0 ~ N(mu, v I), y = H x_0 + N(0,
// sigma_y^2 I). Throws std::runtime_error when the precision matrix is not
// positive definite.
GaussianMoments exact_gaussian_posterior(const GaussianPrior& prior,
                                         const DenseOperator& op,
                                         const Vector& y, double sigma_y);

// Tensor grid, one axis per data dimension.
struct GridAxis {
  double lo = 0.0;
  double hi = 0.0;
  int points = 0;
};

struct QuadratureResult {
  Vector mean;
  // |full-grid mean - half-grid mean|_inf.
  double error_estimate = 0.0;
  bool warning = false;
  std::string message;
};

// Trapezoidal integration of x p(y | x) p(x) over the grid (d_x <= 2).
// The discretization error is estimated by repeating on every other node.
QuadratureResult quadrature_posterior_mean(const GmmPrior& prior,
                                           const DenseOperator& op,
                                           const Vector& y, double sigma_y,
                                           const std::vector<GridAxis>& grid,
                                           double tolerance = 1e-6);

// Grid covering every component's posterior mass for E[x_0 | x_t = x].
std::vector<GridAxis> denoiser_grid(const GmmPrior& prior, const Vector& x,
                                    double sigma, int points);

// E[x_0 | x_t = x] by quadrature: the identity operator with sigma_y = sigma.
QuadratureResult quadrature_denoise(const GmmPrior& prior, const Vector& x,
                                    double sigma, int points = 2001);

struct Binning {
  std::vector<GridAxis> axes;  // points = number of bins

  static Binning uniform(double lo, double hi, int bins);
  // Range of the pooled samples, per column.
  static Binning covering(const Matrix& a, const Matrix& b, int bins);
};

// Total variation between binned empirical distributions; rows are samples.
// Samples outside the binning range fall into the edge bins.
double tv_distance(const Matrix& samples_a, const Matrix& samples_b,
                   const Binning& binning);
double tv_distance(const Vector& samples_a, const Vector& samples_b,
                   const Binning& binning);

// Draw from N(mean, cov); cov may be singular (eigen-decomposition square
// root with negative eigenvalues clipped).
Vector sample_gaussian(const Vector& mean, const Matrix& cov, Rng& rng);

// Moments of z[target] | z[given] = values for z ~ N(mean, cov).
GaussianMoments condition_gaussian(const Vector& mean, const Matrix& cov,
                                   const std::vector<Index>& target,
                                   const std::vector<Index>& given,
                                   const Vector& values);

// Linear-Gaussian chain for exact-conditional sampler checks:
//   x_0 ~ N(prior_mean, prior_variance I)
//   x_t = x_{t-1} + sqrt(sigma_t^2 - sigma_{t-1}^2) eps_t
//   phi ~ N(phi_mean, phi_variance)       (scalar)
//   y = phi A x_0 + N(0, sigma_y^2 I)
struct ToyModel {
  Vector prior_mean;
  double prior_variance = 1.0;
  Matrix base_operator;  // A
  double sigma_y = 1.0;
  std::vector<double> sigmas;  // sigma_0 = 0 .. sigma_T
  double phi_mean = 1.0;
  double phi_variance = 1.0;
  bool phi_known = false;  // pin phi at phi_mean
  Vector y;
  // Grid used for non-Gaussian phi conditionals: phi_mean +- halfwidth
  // prior standard deviations.
  int phi_grid_points = 2049;
  double phi_grid_halfwidth = 8.0;

  int steps() const { return static_cast<int>(sigmas.size()) - 1; }
  Index dim() const { return prior_mean.size(); }
  Index measurement_dim() const { return base_operator.rows(); }

  // Throws std::invalid_argument for T > 3, d_x > 2, d_y > 2 or
  // inconsistent shapes.
  void validate() const;

  // Joint moments of z = (x_0, ..., x_T, y) given phi.
  GaussianMoments joint(double phi) const;
  Index latent_offset(int t) const { return t * dim(); }
  Index measurement_offset() const { return (steps() + 1) * dim(); }

  // Exact posterior of x_0 | y when phi is known.
  GaussianMoments x0_posterior(double phi) const;

  // log p(y | x_0 ~ N(m, c I), phi) up to a phi-independent constant.
  // c = 0 conditions on x_0 = m; (prior_mean, prior_variance) marginalizes.
  double log_likelihood(double phi, const Vector& m, double c) const;
  // Moments (m, c) of x_0 | x_t = x at noise level sigma.
  std::pair<Vector, double> x0_given_latent(const Vector& x,
                                            double sigma) const;
  double phi_grid_lo() const;
  double phi_grid_hi() const;
};

// Draws from a scalar density given by its log up to a constant, using the
// piecewise-linear interpolant on a uniform grid (sampled exactly).
double sample_on_grid(const std::function<double(double)>& log_density,
                      double lo, double hi, int points, Rng& rng);

// Independent draws from p(x_0, phi | y): phi from its marginal on the grid,
// then x_0 | phi, y. Row layout (x_0, phi); with phi_known phi is fixed.
Matrix sample_toy_posterior(const ToyModel& toy, int count, Rng& rng);

// Monte Carlo estimate of the Jensen gap |E f(H x_0) - f(H xhat)| with
// f = N(y; ., sigma_y^2 I) and x_0 ~ p(x_0 | x_t). m1 is estimated from the
// same draws, so |gap| <= L s1 m1 holds sample-for-sample.
struct JensenGapEstimate {
  double gap = 0.0;
  double m1 = 0.0;
  double s1 = 0.0;
};

JensenGapEstimate estimate_jensen_gap(const GmmPrior& prior,
                                      const DenseOperator& op,
                                      const Vector& y, double sigma_y,
                                      const Vector& x_t, double sigma_t,
                                      const Vector& x_hat, int samples,
                                      Rng& rng);

// Draw from p(x_0 | x_t = x) under a GMM prior.
Vector sample_gmm_posterior(const GmmPrior& prior, const Vector& x,
                            double sigma, Rng& rng);

}  // namespace gibbsddrm::oracle

#endif  // GIBBSDDRM_ORACLE_HPP_
