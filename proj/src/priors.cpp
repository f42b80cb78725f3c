#include "gibbsddrm/priors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gibbsddrm {
namespace {

// Posterior mean of x_0 given x under a single isotropic Gaussian component.
Vector shrink_toward(const Vector& center, double variance, const Vector& x,
                     double sigma) {
  const double gain = variance / (variance + sigma * sigma);
  return center + gain * (x - center);
}

void check_sigma(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("denoiser: sigma must be finite and >= 0");
  }
}

}  // namespace

NoiseSchedule::NoiseSchedule(std::vector<double> sigmas)
    : sigmas_(std::move(sigmas)) {
  if (sigmas_.size() < 2) {
    throw std::invalid_argument("NoiseSchedule: need T >= 1");
  }
  if (sigmas_.front() != 0.0) {
    throw std::invalid_argument("NoiseSchedule: sigma_0 must be 0");
  }
  for (size_t t = 0; t + 1 < sigmas_.size(); ++t) {
    if (!(sigmas_[t] < sigmas_[t + 1]) || !std::isfinite(sigmas_[t + 1])) {
      throw std::invalid_argument(
          "NoiseSchedule: sigmas must be strictly increasing (index " +
          std::to_string(t + 1) + ")");
    }
  }
}

NoiseSchedule make_linear_schedule(int steps, double sigma_max) {
  if (steps < 1) throw std::invalid_argument("make_linear_schedule: T < 1");
  if (!(sigma_max > 0.0)) {
    throw std::invalid_argument("make_linear_schedule: sigma_max <= 0");
  }
  std::vector<double> sigmas(static_cast<size_t>(steps) + 1);
  for (int t = 0; t <= steps; ++t) {
    sigmas[static_cast<size_t>(t)] = sigma_max * t / steps;
  }
  return NoiseSchedule(std::move(sigmas));
}

NoiseSchedule make_geometric_schedule(int steps, double sigma_min,
                                      double sigma_max) {
  if (steps < 1) throw std::invalid_argument("make_geometric_schedule: T < 1");
  if (!(sigma_min > 0.0) || !(sigma_max > sigma_min)) {
    if (!(steps == 1 && sigma_max > 0.0)) {
      throw std::invalid_argument(
          "make_geometric_schedule: need 0 < sigma_min < sigma_max");
    }
  }
  std::vector<double> sigmas(static_cast<size_t>(steps) + 1, 0.0);
  if (steps == 1) {
    sigmas[1] = sigma_max;
    return NoiseSchedule(std::move(sigmas));
  }
  const double ratio = std::log(sigma_max / sigma_min) / (steps - 1);
  for (int t = 1; t <= steps; ++t) {
    sigmas[static_cast<size_t>(t)] = sigma_min * std::exp(ratio * (t - 1));
  }
  sigmas.back() = sigma_max;
  return NoiseSchedule(std::move(sigmas));
}

GaussianPrior::GaussianPrior(Vector mean, double variance)
    : mean_(std::move(mean)), variance_(variance) {
  if (mean_.size() == 0) throw std::invalid_argument("GaussianPrior: empty");
  if (!(variance_ > 0.0)) {
    throw std::invalid_argument("GaussianPrior: variance must be > 0");
  }
}

Vector GaussianPrior::estimate(const Vector& x, double sigma) const {
  return gaussian_denoise(*this, x, sigma);
}

Vector GaussianPrior::sample(Rng& rng) const {
  return mean_ + std::sqrt(variance_) * rng.normal_vector(mean_.size());
}

GmmPrior::GmmPrior(Vector weights, Matrix means, double variance)
    : weights_(std::move(weights)), means_(std::move(means)),
      variance_(variance) {
  if (weights_.size() == 0 || means_.rows() == 0) {
    throw std::invalid_argument("GmmPrior: empty mixture");
  }
  if (weights_.size() != means_.rows()) {
    throw std::invalid_argument("GmmPrior: weights/means count mismatch");
  }
  if (means_.cols() == 0) throw std::invalid_argument("GmmPrior: zero dim");
  if ((weights_.array() < 0.0).any()) {
    throw std::invalid_argument("GmmPrior: negative weight");
  }
  if (std::abs(weights_.sum() - 1.0) > 1e-9) {
    throw std::invalid_argument("GmmPrior: weights must sum to 1");
  }
  if (!(variance_ > 0.0)) {
    throw std::invalid_argument("GmmPrior: variance must be > 0");
  }
}

Vector GmmPrior::responsibilities(const Vector& x, double sigma) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("GmmPrior: dimension mismatch");
  }
  check_sigma(sigma);
  const double total_var = variance_ + sigma * sigma;
  Vector logits(components());
  for (Index k = 0; k < components(); ++k) {
    const double w = weights_(k);
    logits(k) = w > 0.0 ? std::log(w) - (x - means_.row(k).transpose())
                                                .squaredNorm() /
                                            (2.0 * total_var)
                        : -std::numeric_limits<double>::infinity();
  }
  const double peak = logits.maxCoeff();
  Vector r = (logits.array() - peak).exp();
  return r / r.sum();
}

Vector GmmPrior::estimate(const Vector& x, double sigma) const {
  return gmm_denoise(*this, x, sigma);
}

Vector GmmPrior::sample(Rng& rng) const {
  double u = rng.uniform();
  Index k = 0;
  for (; k + 1 < components(); ++k) {
    if (u < weights_(k)) break;
    u -= weights_(k);
  }
  return means_.row(k).transpose() +
         std::sqrt(variance_) * rng.normal_vector(dim());
}

GmmPrior GmmPrior::from_json(const nlohmann::json& doc) {
  if (!doc.contains("weights") || !doc.contains("means") ||
      !doc.contains("variance")) {
    throw std::invalid_argument(
        "GmmPrior: JSON needs weights, means and variance");
  }
  const auto w = doc.at("weights").get<std::vector<double>>();
  const auto m = doc.at("means").get<std::vector<std::vector<double>>>();
  if (m.empty() || m.front().empty()) {
    throw std::invalid_argument("GmmPrior: empty mixture");
  }
  Matrix means(static_cast<Index>(m.size()),
               static_cast<Index>(m.front().size()));
  for (size_t k = 0; k < m.size(); ++k) {
    if (m[k].size() != m.front().size()) {
      throw std::invalid_argument("GmmPrior: ragged means");
    }
    for (size_t j = 0; j < m[k].size(); ++j) {
      means(static_cast<Index>(k), static_cast<Index>(j)) = m[k][j];
    }
  }
  return GmmPrior(Eigen::Map<const Vector>(w.data(), static_cast<Index>(w.size())),
                  std::move(means), doc.at("variance").get<double>());
}

nlohmann::json GmmPrior::to_json() const {
  nlohmann::json doc;
  doc["weights"] = std::vector<double>(weights_.data(),
                                       weights_.data() + weights_.size());
  auto means = nlohmann::json::array();
  for (Index k = 0; k < components(); ++k) {
    std::vector<double> row(static_cast<size_t>(dim()));
    for (Index j = 0; j < dim(); ++j) row[static_cast<size_t>(j)] = means_(k, j);
    means.push_back(row);
  }
  doc["means"] = std::move(means);
  doc["variance"] = variance_;
  return doc;
}

Vector gaussian_denoise(const GaussianPrior& prior, const Vector& x,
                        double sigma) {
  if (x.size() != prior.dim()) {
    throw std::invalid_argument("gaussian_denoise: dimension mismatch");
  }
  check_sigma(sigma);
  if (sigma == 0.0) return x;
  return shrink_toward(prior.mean(), prior.variance(), x, sigma);
}

Vector gmm_denoise(const GmmPrior& prior, const Vector& x, double sigma) {
  const Vector r = prior.responsibilities(x, sigma);
  if (sigma == 0.0) return x;
  Vector out = Vector::Zero(x.size());
  for (Index k = 0; k < prior.components(); ++k) {
    if (r(k) == 0.0) continue;
    out += r(k) * shrink_toward(prior.means().row(k).transpose(),
                                prior.variance(), x, sigma);
  }
  return out;
}

}  // namespace gibbsddrm
