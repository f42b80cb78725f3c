#ifndef GIBBSDDRM_RESULT_HPP_
#define GIBBSDDRM_RESULT_HPP_

#include "gibbsddrm/types.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gibbsddrm {

enum class SampleKind { kLatentInit, kLatent, kPhi };

const char* to_string(SampleKind kind);

// One sampling operation in execution order: which variable, at which
// (cycle, t, m), and how many phi updates K the cycle had made before it.
struct TraceEvent {
  SampleKind kind = SampleKind::kLatent;
  int cycle = 0;
  int t = 0;
  int m = 0;
  int k = 0;

  bool operator==(const TraceEvent&) const = default;
};

struct StepDiagnostics {
  int cycle = 0;
  int t = 0;
  int m = 0;
  // ||y - H_phi xhat_t|| with the phi in force after the step.
  double residual = 0.0;
  long denoiser_evaluations = 0;
  Vector phi;
};

struct RestorationResult {
  Vector x0;
  Vector phi;
  std::vector<TraceEvent> events;
  std::vector<StepDiagnostics> steps;
  long denoiser_evaluations = 0;
  long latent_samples = 0;
  long phi_updates = 0;
  // Set when a run aborted on a non-finite value; names the failing step.
  std::optional<std::string> failure;
};

// Raised when a sampled latent or parameter becomes NaN/Inf.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& what, int cycle, int t, int m)
      : std::runtime_error(what + " (cycle " + std::to_string(cycle) +
                           ", t " + std::to_string(t) + ", m " +
                           std::to_string(m) + ")"),
        cycle_(cycle), t_(t), m_(m) {}

  int cycle() const { return cycle_; }
  int t() const { return t_; }
  int m() const { return m_; }

 private:
  int cycle_;
  int t_;
  int m_;
};

}  // namespace gibbsddrm

#endif  // GIBBSDDRM_RESULT_HPP_
