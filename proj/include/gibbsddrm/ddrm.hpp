#ifndef GIBBSDDRM_DDRM_HPP_
#define GIBBSDDRM_DDRM_HPP_

#include "gibbsddrm/operators.hpp"
#include "gibbsddrm/priors.hpp"
#include "gibbsddrm/result.hpp"

namespace gibbsddrm {

struct DdrmParams {
  double eta = 0.85;
  double eta_b = 1.0;
  double sigma_y = 0.0;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// Which case of the per-coordinate conditional fired.
enum class DdrmBranch {
  kZeroGain,      // s_i = 0: follow the previous latent
  kNoisyBin,      // sigma_t < sigma_y / s_i: pull toward ybar, keep noise
  kInformative,   // sigma_t >= sigma_y / s_i: interpolate toward ybar
};

struct BinUpdate {
  DdrmBranch branch;
  Complex mean;
  double variance;
};

// Conditional for x_T in one spectral coordinate. Coordinates whose
// variance sigma_T^2 - sigma_y^2 / s_i^2 would be negative fall back to the
// zero-gain branch.
BinUpdate ddrm_initial_bin(bool zero_gain, double gain, Complex y_bar,
                           double sigma_top, const DdrmParams& params);

// Conditional for x_t given x_{t+1} in one spectral coordinate.
// sigma_y / s_i is taken as 0 when sigma_y = 0.
BinUpdate ddrm_bin_update(bool zero_gain, double gain, Complex x_hat,
                          Complex x_next, Complex y_bar, double sigma_t,
                          double sigma_next, const DdrmParams& params);

// Per-coordinate zero-gain mask of an operator (gain < kZeroGainRelTol * s_1).
std::vector<bool> zero_gain_mask(const SpectralOperator& op);

LatentState sample_xT(const SpectralOperator& op, const Vector& y,
                      const NoiseSchedule& schedule, const DdrmParams& params,
                      Rng& rng);

struct LatentStep {
  LatentState latent;
  // Denoiser output at (x_{t+1}, sigma_{t+1}) that drove the update.
  Vector x_hat;
};

// Draws x_t from x_{t+1} (latent.t == t + 1). The denoiser is evaluated once,
// at x_{t+1} with noise level sigma_{t+1}.
LatentStep sample_xt(const SpectralOperator& op, const LatentState& next,
                     const Vector& y, const NoiseSchedule& schedule,
                     const DdrmParams& params, const Denoiser& denoiser,
                     Rng& rng);

// Noise streams of one restoration. Every latent draw gets its own stream
// keyed by (cycle, t, redraw), all forked from one split of the caller's
// generator. The last draw of x_t in a cycle has redraw 0, so a blind chain
// and a non-blind chain built from equal seeds feed their final latents the
// same noise, and a chain with no phi updates is exactly run_ddrm.
class NoiseStreams {
 public:
  explicit NoiseStreams(Rng& rng) : base_(rng.split()) {}
  Rng latent(int cycle, int t, int redraw) const;
  Rng phi() const;

 private:
  Rng base_;
};

// Non-blind restoration with phi fixed at op.params().
RestorationResult run_ddrm(const SpectralOperator& op, const Vector& y,
                           const NoiseSchedule& schedule,
                           const DdrmParams& params, const Denoiser& denoiser,
                           Rng& rng);

}  // namespace gibbsddrm

#endif  // GIBBSDDRM_DDRM_HPP_
