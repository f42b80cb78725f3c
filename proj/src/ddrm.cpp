#include "gibbsddrm/ddrm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gibbsddrm {

const char* to_string(SampleKind kind) {
  switch (kind) {
    case SampleKind::kLatentInit: return "sample_xT";
    case SampleKind::kLatent: return "sample_xt";
    case SampleKind::kPhi: return "sample_phi";
  }
  return "unknown";
}

void DdrmParams::validate() const {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("ddrm.eta must lie in [0, 1]");
  }
  if (!(eta_b >= 0.0 && eta_b <= 1.0)) {
    throw std::invalid_argument("ddrm.eta_b must lie in [0, 1]");
  }
  if (!(sigma_y >= 0.0) || !std::isfinite(sigma_y)) {
    throw std::invalid_argument("ddrm.sigma_y must be finite and >= 0");
  }
}

BinUpdate ddrm_initial_bin(bool zero_gain, double gain, Complex y_bar,
                           double sigma_top, const DdrmParams& params) {
  const double top_var = sigma_top * sigma_top;
  if (!zero_gain) {
    const double meas_std = params.sigma_y > 0.0 ? params.sigma_y / gain : 0.0;
    const double var = top_var - meas_std * meas_std;
    if (var >= 0.0) return {DdrmBranch::kInformative, y_bar, var};
  }
  return {DdrmBranch::kZeroGain, Complex(0.0, 0.0), top_var};
}

BinUpdate ddrm_bin_update(bool zero_gain, double gain, Complex x_hat,
                          Complex x_next, Complex y_bar, double sigma_t,
                          double sigma_next, const DdrmParams& params) {
  const double keep = std::sqrt(1.0 - params.eta * params.eta);
  const double fresh_var = params.eta * params.eta * sigma_t * sigma_t;
  if (zero_gain) {
    return {DdrmBranch::kZeroGain,
            x_hat + keep * sigma_t * (x_next - x_hat) / sigma_next, fresh_var};
  }
  const double meas_std = params.sigma_y > 0.0 ? params.sigma_y / gain : 0.0;
  if (sigma_t < meas_std) {
    return {DdrmBranch::kNoisyBin,
            x_hat + keep * sigma_t * (y_bar - x_hat) / meas_std, fresh_var};
  }
  const double shrunk = meas_std * params.eta_b;
  return {DdrmBranch::kInformative,
          (1.0 - params.eta_b) * x_hat + params.eta_b * y_bar,
          std::max(0.0, sigma_t * sigma_t - shrunk * shrunk)};
}

std::vector<bool> zero_gain_mask(const SpectralOperator& op) {
  const Vector& gains = op.spectral_gains();
  const double s1 = gains.size() > 0 ? gains.maxCoeff() : 0.0;
  std::vector<bool> mask(static_cast<size_t>(gains.size()));
  for (Index i = 0; i < gains.size(); ++i) {
    mask[static_cast<size_t>(i)] =
        !(gains(i) > 0.0) || gains(i) < kZeroGainRelTol * s1;
  }
  return mask;
}

namespace {

void check_measurement(const SpectralOperator& op, const Vector& y) {
  if (y.size() != op.output_dim()) {
    throw std::invalid_argument("ddrm: measurement dimension mismatch");
  }
}

}  // namespace

LatentState sample_xT(const SpectralOperator& op, const Vector& y,
                      const NoiseSchedule& schedule, const DdrmParams& params,
                      Rng& rng) {
  params.validate();
  check_measurement(op, y);
  const int top = schedule.steps();
  const double sigma_top = schedule.sigma(top);
  const CVector y_bar = op.to_spectral_measurement(y);
  const CVector noise = op.to_spectral_data(rng.normal_vector(op.input_dim()));
  const Vector& gains = op.spectral_gains();
  const auto zero = zero_gain_mask(op);

  CVector x_bar(y_bar.size());
  for (Index i = 0; i < x_bar.size(); ++i) {
    const BinUpdate u = ddrm_initial_bin(zero[static_cast<size_t>(i)], gains(i),
                                         y_bar(i), sigma_top, params);
    x_bar(i) = u.mean + std::sqrt(u.variance) * noise(i);
  }
  return LatentState{top, op.from_spectral_data(x_bar)};
}

LatentStep sample_xt(const SpectralOperator& op, const LatentState& next,
                     const Vector& y, const NoiseSchedule& schedule,
                     const DdrmParams& params, const Denoiser& denoiser,
                     Rng& rng) {
  params.validate();
  check_measurement(op, y);
  const int t = next.t - 1;
  if (t < 0 || next.t > schedule.steps()) {
    throw std::invalid_argument("sample_xt: step " + std::to_string(t) +
                                " outside [0, T)");
  }
  if (next.x.size() != op.input_dim()) {
    throw std::invalid_argument("sample_xt: latent dimension mismatch");
  }
  const double sigma_t = schedule.sigma(t);
  const double sigma_next = schedule.sigma(next.t);

  LatentStep out;
  out.x_hat = denoiser.estimate(next.x, sigma_next);
  const CVector hat_bar = op.to_spectral_data(out.x_hat);
  const CVector next_bar = op.to_spectral_data(next.x);
  const CVector y_bar = op.to_spectral_measurement(y);
  const CVector noise = op.to_spectral_data(rng.normal_vector(op.input_dim()));
  const Vector& gains = op.spectral_gains();
  const auto zero = zero_gain_mask(op);

  CVector x_bar(hat_bar.size());
  for (Index i = 0; i < x_bar.size(); ++i) {
    const BinUpdate u =
        ddrm_bin_update(zero[static_cast<size_t>(i)], gains(i), hat_bar(i),
                        next_bar(i), y_bar(i), sigma_t, sigma_next, params);
    x_bar(i) = u.mean + std::sqrt(u.variance) * noise(i);
  }
  out.latent = LatentState{t, op.from_spectral_data(x_bar)};
  return out;
}

Rng NoiseStreams::latent(int cycle, int t, int redraw) const {
  const auto key = (static_cast<std::uint64_t>(cycle) << 42) ^
                   (static_cast<std::uint64_t>(t) << 21) ^
                   static_cast<std::uint64_t>(redraw);
  return base_.fork(key);
}

Rng NoiseStreams::phi() const { return base_.fork(~std::uint64_t{0}); }

RestorationResult run_ddrm(const SpectralOperator& op, const Vector& y,
                           const NoiseSchedule& schedule,
                           const DdrmParams& params, const Denoiser& denoiser,
                           Rng& rng) {
  const NoiseStreams streams(rng);
  RestorationResult result;
  result.phi = op.params();
  Rng top_rng = streams.latent(1, schedule.steps(), 0);
  LatentState latent = sample_xT(op, y, schedule, params, top_rng);
  result.events.push_back({SampleKind::kLatentInit, 1, latent.t, 0, 0});
  ++result.latent_samples;
  for (int t = schedule.steps() - 1; t >= 0; --t) {
    Rng step_rng = streams.latent(1, t, 0);
    LatentStep step =
        sample_xt(op, latent, y, schedule, params, denoiser, step_rng);
    ++result.denoiser_evaluations;
    ++result.latent_samples;
    if (!step.latent.x.allFinite()) {
      throw NonFiniteError("run_ddrm: non-finite latent", 1, t, 0);
    }
    latent = std::move(step.latent);
    result.events.push_back({SampleKind::kLatent, 1, t, 0, 0});
    result.steps.push_back({1, t, 0, (y - op.apply(step.x_hat)).norm(),
                            result.denoiser_evaluations, op.params()});
  }
  result.x0 = std::move(latent.x);
  return result;
}

}  // namespace gibbsddrm
