#include "gibbsddrm/phi_sampler.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gibbsddrm {

PhiPrior PhiPrior::laplace(double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("laplace prior: lambda <= 0");
  return PhiPrior(Kind::kLaplace, lambda);
}

PhiPrior PhiPrior::gaussian(double lambda) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("gaussian prior: lambda <= 0");
  }
  return PhiPrior(Kind::kGaussian, lambda);
}

Vector PhiPrior::score(const Vector& phi) const {
  switch (kind_) {
    case Kind::kFlat:
      return Vector::Zero(phi.size());
    case Kind::kLaplace:
      return -lambda_ * phi.unaryExpr([](double v) {
        return static_cast<double>((v > 0.0) - (v < 0.0));
      });
    case Kind::kGaussian:
      return -lambda_ * phi;
  }
  return Vector::Zero(phi.size());
}

double PhiPrior::log_density(const Vector& phi) const {
  switch (kind_) {
    case Kind::kFlat: return 0.0;
    case Kind::kLaplace: return -lambda_ * phi.lpNorm<1>();
    case Kind::kGaussian: return -0.5 * lambda_ * phi.squaredNorm();
  }
  return 0.0;
}

void LangevinConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw std::invalid_argument("langevin.step_size must be > 0");
  }
  if (n_steps < 1) throw std::invalid_argument("langevin.n_steps must be >= 1");
  if (noise_scale != 0.0 && noise_scale != 1.0) {
    throw std::invalid_argument("langevin.noise_scale must be 0 or 1");
  }
}

Vector conditional_score_phi(const SpectralOperator& op, const Vector& x_hat,
                             const Vector& y, double sigma_y,
                             const PhiPrior& prior) {
  if (!(sigma_y > 0.0)) {
    throw std::invalid_argument("conditional_score_phi: sigma_y must be > 0");
  }
  return op.datafit_grad(x_hat, y, sigma_y) + prior.score(op.params());
}

Vector langevin_step(SpectralOperator& op, const Vector& x_hat,
                     const Vector& y, double sigma_y,
                     const LangevinConfig& config, Rng& rng) {
  const Vector score =
      conditional_score_phi(op, x_hat, y, sigma_y, config.prior);
  Vector phi = op.params() + (config.step_size / 2.0) * score;
  if (config.noise_scale != 0.0) {
    phi += config.noise_scale * std::sqrt(config.step_size) *
           rng.normal_vector(phi.size());
  }
  if (config.project_to_simplex) phi = project_kernel_simplex(phi);
  op.set_params(phi);
  return phi;
}

Vector sample_phi(SpectralOperator& op, const LatentState& latent,
                  const NoiseSchedule& schedule, const Denoiser& denoiser,
                  const Vector& y, double sigma_y,
                  const LangevinConfig& config, Rng& rng) {
  config.validate();
  if (latent.t < 0 || latent.t > schedule.steps()) {
    throw std::invalid_argument("sample_phi: latent step out of range");
  }
  const Vector x_hat = denoiser.estimate(latent.x, schedule.sigma(latent.t));
  for (int i = 0; i < config.n_steps; ++i) {
    langevin_step(op, x_hat, y, sigma_y, config, rng);
  }
  return op.params();
}

double JensenGapBound::value() const {
  return jensen_gap_bound(sigma_y, d_y, s1, m1);
}

double jensen_gap_bound(double sigma_y, Index d_y, double s1, double m1) {
  if (!(sigma_y > 0.0)) {
    throw std::invalid_argument("jensen_gap_bound: sigma_y must be > 0");
  }
  if (d_y < 1) throw std::invalid_argument("jensen_gap_bound: d_y < 1");
  if (!(s1 >= 0.0) || !(m1 >= 0.0)) {
    throw std::invalid_argument("jensen_gap_bound: s1 and m1 must be >= 0");
  }
  const double gauss_norm =
      std::pow(std::sqrt(2.0 * std::numbers::pi * sigma_y * sigma_y),
               static_cast<double>(d_y));
  return std::exp(-0.5) * s1 * m1 / (sigma_y * gauss_norm);
}

}  // namespace gibbsddrm
