#ifndef GIBBSDDRM_PRIORS_HPP_
#define GIBBSDDRM_PRIORS_HPP_

#include "gibbsddrm/types.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace gibbsddrm {

// Noise ladder 0 = sigma_0 < sigma_1 < ... < sigma_T of the variance-exploding
// diffusion x_t = x_0 + sigma_t * eps.
class NoiseSchedule {
 public:
  // Throws std::invalid_argument unless sigmas[0] == 0, the ladder is
  // strictly increasing and T >= 1.
  explicit NoiseSchedule(std::vector<double> sigmas);

  int steps() const { return static_cast<int>(sigmas_.size()) - 1; }
  double sigma(int t) const { return sigmas_.at(static_cast<size_t>(t)); }
  double sigma_max() const { return sigmas_.back(); }
  const std::vector<double>& sigmas() const { return sigmas_; }

 private:
  std::vector<double> sigmas_;
};

// sigma_t = sigma_max * t / T.
NoiseSchedule make_linear_schedule(int steps, double sigma_max);

// sigma_t geometric between sigma_min (t = 1) and sigma_max (t = T), with
// sigma_0 = 0. Denser near zero, which is where restoration happens.
NoiseSchedule make_geometric_schedule(int steps, double sigma_min,
                                      double sigma_max);

// The latent x_t of the reverse chain.
struct LatentState {
  int t = 0;
  Vector x;
};

// Estimate of clean data from x_t = x_0 + sigma * eps. Implementations are
// pure and deterministic given (x, sigma) and return x unchanged at sigma 0.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual Index dim() const = 0;
  virtual Vector estimate(const Vector& x, double sigma) const = 0;
};

// x_0 ~ N(mean, variance * I).
class GaussianPrior final : public Denoiser {
 public:
  GaussianPrior(Vector mean, double variance);
  GaussianPrior(Index dim, double mean, double variance)
      : GaussianPrior(Vector::Constant(dim, mean), variance) {}

  Index dim() const override { return mean_.size(); }
  Vector estimate(const Vector& x, double sigma) const override;

  const Vector& mean() const { return mean_; }
  double variance() const { return variance_; }
  Vector sample(Rng& rng) const;

 private:
  Vector mean_;
  double variance_;
};

// x_0 ~ sum_k w_k N(mean_k, variance * I), shared isotropic variance.
class GmmPrior final : public Denoiser {
 public:
  // means: one row per component.
  GmmPrior(Vector weights, Matrix means, double variance);

  Index dim() const override { return means_.cols(); }
  Vector estimate(const Vector& x, double sigma) const override;

  Index components() const { return means_.rows(); }
  const Vector& weights() const { return weights_; }
  const Matrix& means() const { return means_; }
  double variance() const { return variance_; }
  Vector sample(Rng& rng) const;

  // Posterior component responsibilities p(k | x_t = x).
  Vector responsibilities(const Vector& x, double sigma) const;

  // {"weights":[...],"means":[[...],...],"variance":v}
  static GmmPrior from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

 private:
  Vector weights_;
  Matrix means_;
  double variance_;
};

Vector gaussian_denoise(const GaussianPrior& prior, const Vector& x,
                        double sigma);
Vector gmm_denoise(const GmmPrior& prior, const Vector& x, double sigma);

}  // namespace gibbsddrm

#endif  // GIBBSDDRM_PRIORS_HPP_
