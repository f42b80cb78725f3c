#include "gibbsddrm/pcgs.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

namespace gibbsddrm {

InnerCounts::InnerCounts(std::vector<int> counts) : counts_(std::move(counts)) {
  for (size_t t = 0; t < counts_.size(); ++t) {
    if (counts_[t] < 0) {
      throw std::invalid_argument("pcgs.M[" + std::to_string(t) +
                                  "] must be >= 0");
    }
  }
}

InnerCounts InnerCounts::two_regime(int steps, int switch_step, int count) {
  if (steps < 1) throw std::invalid_argument("pcgs.M: steps must be >= 1");
  if (count < 0) throw std::invalid_argument("pcgs.M: count must be >= 0");
  std::vector<int> counts(static_cast<size_t>(steps), 0);
  for (int t = 0; t < steps && t < switch_step; ++t) {
    counts[static_cast<size_t>(t)] = count;
  }
  return InnerCounts(std::move(counts));
}

int InnerCounts::at(int t) const { return counts_.at(static_cast<size_t>(t)); }

int InnerCounts::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), 0);
}

int InnerCounts::before(int t) const {
  int k = 0;
  for (int s = t + 1; s < steps(); ++s) k += at(s);
  return k;
}

InitStrategy InitStrategy::fixed(Vector phi0) {
  InitStrategy s(Kind::kFixedValue);
  s.phi0_ = std::move(phi0);
  return s;
}

InitStrategy InitStrategy::heuristic(std::string name, Heuristic fn) {
  if (!fn) throw std::invalid_argument("phi_init: empty heuristic");
  InitStrategy s(Kind::kHeuristic);
  s.name_ = std::move(name);
  s.fn_ = std::move(fn);
  return s;
}

Vector InitStrategy::initial_phi(const SpectralOperator& op, const Vector& y,
                                 const LangevinConfig& langevin,
                                 Rng& rng) const {
  Vector phi;
  switch (kind_) {
    case Kind::kFixedValue:
      phi = phi0_.size() > 0 ? phi0_ : op.params();
      break;
    case Kind::kHeuristic:
      phi = fn_(op, y, rng);
      break;
    case Kind::kFromPrior: {
      const PhiPrior& prior = langevin.prior;
      phi.resize(op.param_dim());
      if (prior.kind() == PhiPrior::Kind::kLaplace) {
        // Inverse CDF of Laplace(0, 1 / lambda).
        for (Index i = 0; i < phi.size(); ++i) {
          const double u = rng.uniform() - 0.5;
          const double mag = -std::log1p(-2.0 * std::abs(u)) / prior.lambda();
          phi(i) = u < 0.0 ? -mag : mag;
        }
      } else if (prior.kind() == PhiPrior::Kind::kGaussian) {
        phi = rng.normal_vector(op.param_dim()) / std::sqrt(prior.lambda());
      } else {
        throw std::invalid_argument(
            "phi_init: from_prior needs a laplace or gaussian prior");
      }
      break;
    }
  }
  if (phi.size() != op.param_dim()) {
    throw std::invalid_argument("phi_init: expected " +
                                std::to_string(op.param_dim()) +
                                " parameters, got " +
                                std::to_string(phi.size()));
  }
  if (langevin.project_to_simplex) phi = project_kernel_simplex(phi);
  if (!phi.allFinite()) throw std::invalid_argument("phi_init: non-finite phi");
  return phi;
}

void PcgsConfig::validate(const NoiseSchedule& schedule) const {
  if (cycles < 1) throw std::invalid_argument("pcgs.N must be >= 1");
  if (inner.steps() != schedule.steps()) {
    throw std::invalid_argument("pcgs.M must have one entry per step t < T (" +
                                std::to_string(schedule.steps()) + ")");
  }
  if (phi_updates_per_round < 0) {
    throw std::invalid_argument("pcgs.phi_updates_per_round must be >= 0");
  }
  ddrm.validate();
  langevin.validate();
}

LatentStore::LatentStore(int steps)
    : slots_(static_cast<size_t>(steps) + 1), step_(steps) {}

void LatentStore::begin_cycle(int cycle) {
  cycle_ = cycle;
  step_ = static_cast<int>(slots_.size()) - 1;
}

void LatentStore::begin_step(int t) {
  if (t > step_) {
    throw TrimmingViolation("latent store: step " + std::to_string(t) +
                            " begun after step " + std::to_string(step_));
  }
  step_ = t;
}

void LatentStore::write(int t, Vector x) {
  if (t != step_) {
    throw TrimmingViolation("latent store: write to x_" + std::to_string(t) +
                            " during step " + std::to_string(step_));
  }
  Slot& slot = slots_.at(static_cast<size_t>(t));
  slot.x = std::move(x);
  slot.cycle = cycle_;
}

const Vector& LatentStore::read(int t) const {
  const Slot& slot = slots_.at(static_cast<size_t>(t));
  if (t < step_ || slot.cycle != cycle_) {
    throw TrimmingViolation("latent store: x_" + std::to_string(t) +
                            " is trimmed at step " + std::to_string(step_) +
                            " of cycle " + std::to_string(cycle_));
  }
  return slot.x;
}

void validate_trimming(const std::vector<GibbsStep>& cycle, int passes) {
  std::map<std::string, bool> stale;
  for (int pass = 0; pass < passes; ++pass) {
    for (const GibbsStep& step : cycle) {
      for (const auto& c : step.conditioned) {
        if (stale[c]) {
          throw TrimmingViolation("step '" + step.label + "' conditions on " +
                                  c + ", which was trimmed and not resampled");
        }
      }
      for (const auto& s : step.sampled) stale[s] = false;
      for (const auto& s : step.trimmed) stale[s] = true;
    }
  }
}

namespace {

std::string latent_name(int t) { return "x" + std::to_string(t); }

std::vector<std::string> latent_range(int lo, int hi) {
  std::vector<std::string> out;
  for (int t = lo; t < hi; ++t) out.push_back(latent_name(t));
  return out;
}

}  // namespace

std::vector<GibbsStep> gibbsddrm_step_plan(const InnerCounts& inner) {
  const int top = inner.steps();
  std::vector<GibbsStep> plan;
  std::vector<std::string> phi_only{"phi"};
  plan.push_back({"sample_xT", {latent_name(top)}, latent_range(0, top),
                  phi_only});
  for (int t = top - 1; t >= 0; --t) {
    std::vector<std::string> given = latent_range(t + 1, top + 1);
    std::vector<std::string> given_phi = given;
    given_phi.push_back("phi");
    const auto trimmed = latent_range(0, t);
    const std::string at = " t=" + std::to_string(t);
    plan.push_back({"sample_xt" + at, {latent_name(t)}, trimmed, given_phi});
    std::vector<std::string> phi_given = given;
    phi_given.push_back(latent_name(t));
    for (int m = 1; m <= inner.at(t); ++m) {
      const std::string tag = at + " m=" + std::to_string(m);
      plan.push_back({"sample_phi" + tag, {"phi"}, trimmed, phi_given});
      plan.push_back({"sample_xt" + tag, {latent_name(t)}, trimmed, given_phi});
    }
  }
  return plan;
}

namespace {

void check_finite(const Vector& v, const char* what, int cycle, int t, int m) {
  if (!v.allFinite()) {
    throw NonFiniteError(std::string("gibbsddrm: non-finite ") + what, cycle, t,
                         m);
  }
}

double residual(const SpectralOperator& op, const Vector& y,
                const Vector& x_hat) {
  return (y - op.apply(x_hat)).norm();
}

}  // namespace

RestorationResult run_gibbsddrm(const SpectralOperator& op, const Vector& y,
                                const NoiseSchedule& schedule,
                                const Denoiser& denoiser,
                                const PcgsConfig& config, Rng& rng) {
  config.validate(schedule);
  if (config.inner.total() > 0 && !(config.ddrm.sigma_y > 0.0)) {
    throw std::invalid_argument("ddrm.sigma_y must be > 0 when phi is sampled");
  }
  const int top = schedule.steps();
  const bool per_inner = config.granularity == TraceGranularity::kPerInnerStep;
  const NoiseStreams streams(rng);
  Rng phi_rng = streams.phi();
  std::unique_ptr<SpectralOperator> chain_op = op.clone();
  chain_op->set_params(
      config.phi_init.initial_phi(*chain_op, y, config.langevin, phi_rng));

  RestorationResult result;
  LatentStore store(top);
  for (int n = 1; n <= config.cycles; ++n) {
    store.begin_cycle(n);
    int k = 0;
    {
      Rng top_rng = streams.latent(n, top, 0);
      LatentState x_top = sample_xT(*chain_op, y, schedule, config.ddrm, top_rng);
      check_finite(x_top.x, "x_T", n, top, 0);
      store.write(top, std::move(x_top.x));
      ++result.latent_samples;
      result.events.push_back({SampleKind::kLatentInit, n, top, 0, k});
    }
    for (int t = top - 1; t >= 0; --t) {
      store.begin_step(t);
      auto draw_latent = [&](int m) {
        Rng step_rng = streams.latent(n, t, config.inner.at(t) - m);
        LatentStep step =
            sample_xt(*chain_op, LatentState{t + 1, store.read(t + 1)}, y,
                      schedule, config.ddrm, denoiser, step_rng);
        ++result.denoiser_evaluations;
        ++result.latent_samples;
        check_finite(step.latent.x, "x_t", n, t, m);
        store.write(t, std::move(step.latent.x));
        result.events.push_back({SampleKind::kLatent, n, t, m, k});
        return std::move(step.x_hat);
      };
      auto record = [&](int m, const Vector& x_hat) {
        result.steps.push_back({n, t, m, residual(*chain_op, y, x_hat),
                                result.denoiser_evaluations,
                                chain_op->params()});
      };

      Vector x_hat = draw_latent(0);
      if (per_inner) record(0, x_hat);
      for (int m = 1; m <= config.inner.at(t); ++m) {
        sample_phi(*chain_op, LatentState{t, store.read(t)}, schedule, denoiser,
                   y, config.ddrm.sigma_y, config.langevin, phi_rng);
        ++result.denoiser_evaluations;
        ++result.phi_updates;
        ++k;
        check_finite(chain_op->params(), "phi", n, t, m);
        result.events.push_back({SampleKind::kPhi, n, t, m, k});
        if (config.on_phi_update) {
          config.on_phi_update({n, t, m, k, result.denoiser_evaluations,
                                chain_op->params()});
        }
        x_hat = draw_latent(m);
        if (per_inner) record(m, x_hat);
        if (k != config.inner.before(t) + m) {
          throw std::logic_error("gibbsddrm: K bookkeeping broken at t " +
                                 std::to_string(t));
        }
      }
      if (!per_inner) record(config.inner.at(t), x_hat);
    }
    if (k != config.inner.total()) {
      throw std::logic_error("gibbsddrm: K does not match sum of M_t");
    }
  }
  result.x0 = store.read(0);
  result.phi = chain_op->params();
  return result;
}

RestorationResult run_blocked_gibbs(const SpectralOperator& op,
                                    const Vector& y,
                                    const NoiseSchedule& schedule,
                                    const Denoiser& denoiser,
                                    const PcgsConfig& config, Rng& rng) {
  config.validate(schedule);
  if (config.phi_updates_per_round > 0 && !(config.ddrm.sigma_y > 0.0)) {
    throw std::invalid_argument("ddrm.sigma_y must be > 0 when phi is sampled");
  }
  // phi gets its own stream; every round's sweep splits the caller's.
  Rng phi_rng = rng.fork(~std::uint64_t{0});
  std::unique_ptr<SpectralOperator> chain_op = op.clone();
  chain_op->set_params(
      config.phi_init.initial_phi(*chain_op, y, config.langevin, phi_rng));

  RestorationResult result;
  for (int n = 1; n <= config.cycles; ++n) {
    RestorationResult sweep;
    try {
      sweep = run_ddrm(*chain_op, y, schedule, config.ddrm, denoiser, rng);
    } catch (const NonFiniteError& e) {
      throw NonFiniteError("blocked gibbs: non-finite latent", n, e.t(), 0);
    }
    for (TraceEvent ev : sweep.events) {
      ev.cycle = n;
      result.events.push_back(ev);
    }
    for (StepDiagnostics d : sweep.steps) {
      d.cycle = n;
      d.denoiser_evaluations += result.denoiser_evaluations;
      result.steps.push_back(std::move(d));
    }
    result.denoiser_evaluations += sweep.denoiser_evaluations;
    result.latent_samples += sweep.latent_samples;
    result.x0 = std::move(sweep.x0);

    for (int p = 1; p <= config.phi_updates_per_round; ++p) {
      sample_phi(*chain_op, LatentState{0, result.x0}, schedule, denoiser, y,
                 config.ddrm.sigma_y, config.langevin, phi_rng);
      ++result.denoiser_evaluations;
      ++result.phi_updates;
      check_finite(chain_op->params(), "phi", n, 0, p);
      result.events.push_back({SampleKind::kPhi, n, 0, p, p});
      if (config.on_phi_update) {
        config.on_phi_update(
            {n, 0, p, p, result.denoiser_evaluations, chain_op->params()});
      }
    }
  }
  result.phi = chain_op->params();
  return result;
}

}  // namespace gibbsddrm
