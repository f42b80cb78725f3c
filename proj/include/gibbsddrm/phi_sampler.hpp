#ifndef GIBBSDDRM_PHI_SAMPLER_HPP_
#define GIBBSDDRM_PHI_SAMPLER_HPP_

#include "gibbsddrm/operators.hpp"
#include "gibbsddrm/priors.hpp"

namespace gibbsddrm {

// Generic prior on operator parameters.
class PhiPrior {
 public:
  enum class Kind { kFlat, kLaplace, kGaussian };

  static PhiPrior flat() { return PhiPrior(Kind::kFlat, 0.0); }
  // log p = -lambda ||phi||_1; the score uses subgradient 0 at phi_i = 0.
  static PhiPrior laplace(double lambda);
  // log p = -(lambda / 2) ||phi||^2.
  static PhiPrior gaussian(double lambda);

  Kind kind() const { return kind_; }
  double lambda() const { return lambda_; }

  Vector score(const Vector& phi) const;
  // Unnormalized log density.
  double log_density(const Vector& phi) const;

 private:
  PhiPrior(Kind kind, double lambda) : kind_(kind), lambda_(lambda) {}

  Kind kind_;
  double lambda_;
};

struct LangevinConfig {
  double step_size = 1e-5;  // xi
  int n_steps = 1;
  // 1 for Langevin sampling, 0 for the MAP (plain gradient ascent) ablation.
  double noise_scale = 1.0;
  PhiPrior prior = PhiPrior::flat();
  // Project phi onto the kernel simplex after every update.
  bool project_to_simplex = false;

  void validate() const;
};

// Approximate score of p(phi | x_{t:T}, y): likelihood gradient evaluated at
// the denoised estimate plus the prior score.
Vector conditional_score_phi(const SpectralOperator& op, const Vector& x_hat,
                             const Vector& y, double sigma_y,
                             const PhiPrior& prior);

// phi <- phi + (xi / 2) score + noise_scale sqrt(xi) eps, then the optional
// simplex projection. Writes the new phi into op and returns it.
Vector langevin_step(SpectralOperator& op, const Vector& x_hat,
                     const Vector& y, double sigma_y,
                     const LangevinConfig& config, Rng& rng);

// Denoises x_t once at sigma_t, then runs config.n_steps Langevin steps
// against that fixed estimate.
Vector sample_phi(SpectralOperator& op, const LatentState& latent,
                  const NoiseSchedule& schedule, const Denoiser& denoiser,
                  const Vector& y, double sigma_y,
                  const LangevinConfig& config, Rng& rng);

// Upper bound on |p(y | x_{t:T}, phi) - p(y | xhat_t, phi)|:
//   e^{-1/2} s1 m1 / (sigma_y (2 pi sigma_y^2)^{d_y / 2}).
struct JensenGapBound {
  double sigma_y;
  Index d_y;
  double s1;
  double m1;

  double value() const;
};

double jensen_gap_bound(double sigma_y, Index d_y, double s1, double m1);

}  // namespace gibbsddrm

#endif  // GIBBSDDRM_PHI_SAMPLER_HPP_
