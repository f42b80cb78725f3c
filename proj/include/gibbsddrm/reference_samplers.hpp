#ifndef GIBBSDDRM_REFERENCE_SAMPLERS_HPP_
#define GIBBSDDRM_REFERENCE_SAMPLERS_HPP_

// Exact-conditional samplers on the linear-Gaussian toy chain. They share
// the sweep structure of the GibbsDDRM driver but replace every DDRM or
// Langevin approximation by the exact conditional, so stationarity of the
// sampling order can be checked in isolation.

#include "gibbsddrm/oracle.hpp"
#include "gibbsddrm/pcgs.hpp"

#include <string>

namespace gibbsddrm {

enum class ReferenceVariant {
  kSampler1,  // naive Gibbs: every x_t and phi from its full conditional
  kSampler2,  // driver order, full conditionals (stale psi_t kept)
  kSampler3,  // driver order, psi_t drawn jointly with each target
  kPcgs,      // driver order, psi_t trimmed
};

const char* to_string(ReferenceVariant variant);
// Accepts "sampler1", "sampler2", "sampler3", "pcgs".
ReferenceVariant reference_variant_from_string(const std::string& name);

struct ReferenceChain {
  Index dim = 0;
  Matrix latents;  // row n: (x_0, ..., x_T) after sweep n
  Vector phi;

  Matrix x0() const { return latents.leftCols(dim); }
  // Rows (x_0, phi), the layout of oracle::sample_toy_posterior.
  Matrix x0_phi() const;
};

// inner: M_t for the driver-ordered variants; empty means M_t = 1.
// In the kPcgs variant trimmed latents are overwritten with NaN, so any read
// of a trimmed value would surface in the output.
ReferenceChain run_reference_samplers(const oracle::ToyModel& toy,
                                      ReferenceVariant variant, int sweeps,
                                      Rng& rng,
                                      const InnerCounts& inner = {});

}  // namespace gibbsddrm

#endif  // GIBBSDDRM_REFERENCE_SAMPLERS_HPP_
