#ifndef GIBBSDDRM_PCGS_HPP_
#define GIBBSDDRM_PCGS_HPP_

#include "gibbsddrm/ddrm.hpp"
#include "gibbsddrm/phi_sampler.hpp"

#include <functional>
#include <string>
#include <vector>

namespace gibbsddrm {

// Number of alternating (phi, x_t) updates M_t made at each step t < T.
class InnerCounts {
 public:
  InnerCounts() = default;
  // counts[t] = M_t for t = 0..T-1.
  explicit InnerCounts(std::vector<int> counts);

  // M_t = 0 for t >= switch_step, M_t = count below it.
  static InnerCounts two_regime(int steps, int switch_step, int count);
  static InnerCounts zeros(int steps) { return two_regime(steps, 0, 0); }

  int at(int t) const;
  int steps() const { return static_cast<int>(counts_.size()); }
  int total() const;
  // sum_{t' > t} M_{t'}: phi updates made before step t begins.
  int before(int t) const;
  const std::vector<int>& counts() const { return counts_; }

 private:
  std::vector<int> counts_;
};

// How phi is chosen before the first cycle.
class InitStrategy {
 public:
  using Heuristic =
      std::function<Vector(const SpectralOperator&, const Vector& y, Rng&)>;

  enum class Kind { kFromPrior, kFixedValue, kHeuristic };

  // Keep the operator's current parameters.
  InitStrategy() : kind_(Kind::kFixedValue) {}
  static InitStrategy from_prior() { return InitStrategy(Kind::kFromPrior); }
  static InitStrategy fixed(Vector phi0);
  static InitStrategy heuristic(std::string name, Heuristic fn);

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }

  // Produces an initial phi. Draws from Laplace/Gaussian priors for
  // kFromPrior; projects to the simplex when the Langevin config asks for it.
  Vector initial_phi(const SpectralOperator& op, const Vector& y,
                     const LangevinConfig& langevin, Rng& rng) const;

 private:
  explicit InitStrategy(Kind kind) : kind_(kind) {}

  Kind kind_;
  Vector phi0_;
  std::string name_;
  Heuristic fn_;
};

enum class TraceGranularity { kPerStep, kPerInnerStep };

struct PhiUpdateInfo {
  int cycle;
  int t;
  int m;
  int k;
  long denoiser_evaluations;
  const Vector& phi;
};

struct PcgsConfig {
  int cycles = 1;  // N
  InnerCounts inner;
  DdrmParams ddrm;
  LangevinConfig langevin;
  InitStrategy phi_init;
  TraceGranularity granularity = TraceGranularity::kPerStep;
  // Blocked Gibbs only: sample_phi calls after each full DDRM sweep.
  int phi_updates_per_round = 1;
  // Called after every phi update.
  std::function<void(const PhiUpdateInfo&)> on_phi_update;

  void validate(const NoiseSchedule& schedule) const;
};

// Raised when a latent is read after trimming made it stale.
class TrimmingViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Holds the latents of one chain and enforces the trimming rule: within a
// cycle, once step t has begun only x_t .. x_T written this cycle may be read.
class LatentStore {
 public:
  explicit LatentStore(int steps);

  void begin_cycle(int cycle);
  void begin_step(int t);
  void write(int t, Vector x);
  const Vector& read(int t) const;

 private:
  struct Slot {
    Vector x;
    int cycle = 0;
  };
  std::vector<Slot> slots_;
  int cycle_ = 0;
  int step_ = 0;
};

// One step of a Gibbs-type sweep, for checking a PCGS schedule: the step
// samples `sampled`, draws and discards `trimmed`, and conditions on
// `conditioned`.
struct GibbsStep {
  std::string label;
  std::vector<std::string> sampled;
  std::vector<std::string> trimmed;
  std::vector<std::string> conditioned;
};

// Throws TrimmingViolation when some step conditions on a variable whose
// latest draw was trimmed and not sampled again since. The cycle is replayed
// `passes` times so wrap-around dependencies are caught.
void validate_trimming(const std::vector<GibbsStep>& cycle, int passes = 2);

// The step plan executed by run_gibbsddrm for one cycle.
std::vector<GibbsStep> gibbsddrm_step_plan(const InnerCounts& inner);

// Partially collapsed Gibbs sampler over (x_{0:T}, phi). Works on a private
// clone of op; the returned result carries the final x_0 and phi.
RestorationResult run_gibbsddrm(const SpectralOperator& op, const Vector& y,
                                const NoiseSchedule& schedule,
                                const Denoiser& denoiser,
                                const PcgsConfig& config, Rng& rng);

// Baseline alternating full DDRM sweeps (phi fixed) with
// config.phi_updates_per_round phi updates against the sweep's x_0, for
// config.cycles rounds.
RestorationResult run_blocked_gibbs(const SpectralOperator& op,
                                    const Vector& y,
                                    const NoiseSchedule& schedule,
                                    const Denoiser& denoiser,
                                    const PcgsConfig& config, Rng& rng);

}  // namespace gibbsddrm

#endif  // GIBBSDDRM_PCGS_HPP_
