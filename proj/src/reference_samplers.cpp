#include "gibbsddrm/reference_samplers.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace gibbsddrm {

const char* to_string(ReferenceVariant variant) {
  switch (variant) {
    case ReferenceVariant::kSampler1: return "sampler1";
    case ReferenceVariant::kSampler2: return "sampler2";
    case ReferenceVariant::kSampler3: return "sampler3";
    case ReferenceVariant::kPcgs: return "pcgs";
  }
  return "unknown";
}

ReferenceVariant reference_variant_from_string(const std::string& name) {
  if (name == "sampler1") return ReferenceVariant::kSampler1;
  if (name == "sampler2") return ReferenceVariant::kSampler2;
  if (name == "sampler3") return ReferenceVariant::kSampler3;
  if (name == "pcgs") return ReferenceVariant::kPcgs;
  throw std::invalid_argument("unknown reference sampler variant: " + name);
}

Matrix ReferenceChain::x0_phi() const {
  Matrix out(latents.rows(), dim + 1);
  out.leftCols(dim) = latents.leftCols(dim);
  out.col(dim) = phi;
  return out;
}

namespace {

class ToyChain {
 public:
  ToyChain(const oracle::ToyModel& toy, Rng& rng) : toy_(toy), rng_(rng) {
    const int top = toy.steps();
    x_.resize(static_cast<size_t>(top) + 1);
    x_[0] = toy.prior_mean +
            std::sqrt(toy.prior_variance) * rng.normal_vector(toy.dim());
    for (int t = 1; t <= top; ++t) {
      const double s1 = toy.sigmas[static_cast<size_t>(t)];
      const double s0 = toy.sigmas[static_cast<size_t>(t) - 1];
      x_[static_cast<size_t>(t)] =
          x_[static_cast<size_t>(t) - 1] +
          std::sqrt(s1 * s1 - s0 * s0) * rng.normal_vector(toy.dim());
    }
    phi_ = toy.phi_mean;
  }

  // Draw the latents in `targets` jointly from p(targets | phi, given, y).
  void draw_latents(const std::vector<int>& targets,
                    const std::vector<int>& given) {
    const Index d = toy_.dim();
    const oracle::GaussianMoments z = toy_.joint(phi_);
    std::vector<Index> target_idx;
    std::vector<Index> given_idx;
    for (int t : targets) {
      for (Index i = 0; i < d; ++i) target_idx.push_back(toy_.latent_offset(t) + i);
    }
    Vector values(static_cast<Index>(given.size()) * d + toy_.measurement_dim());
    Index pos = 0;
    for (int t : given) {
      const Vector& xt = x_[static_cast<size_t>(t)];
      for (Index i = 0; i < d; ++i) {
        given_idx.push_back(toy_.latent_offset(t) + i);
        values(pos++) = xt(i);
      }
    }
    for (Index i = 0; i < toy_.measurement_dim(); ++i) {
      given_idx.push_back(toy_.measurement_offset() + i);
      values(pos++) = toy_.y(i);
    }
    const oracle::GaussianMoments c =
        oracle::condition_gaussian(z.mean, z.covariance, target_idx, given_idx,
                                   values);
    const Vector draw = oracle::sample_gaussian(c.mean, c.covariance, rng_);
    for (size_t k = 0; k < targets.size(); ++k) {
      x_[static_cast<size_t>(targets[k])] =
          draw.segment(static_cast<Index>(k) * d, d);
    }
  }

  // p(phi | x_{0:T}, y) = p(phi | x_0, y), Gaussian.
  void draw_phi_full() {
    if (toy_.phi_known) return;
    const Vector a = toy_.base_operator * x_[0];
    const double sy2 = toy_.sigma_y * toy_.sigma_y;
    const double prec = 1.0 / toy_.phi_variance + a.squaredNorm() / sy2;
    const double mean =
        (toy_.phi_mean / toy_.phi_variance + a.dot(toy_.y) / sy2) / prec;
    phi_ = mean + rng_.normal() / std::sqrt(prec);
  }

  // p(phi | x_{t:T}, y) = p(phi | x_t, y) with x_{0:t-1} integrated out.
  void draw_phi_collapsed(int t) {
    if (toy_.phi_known) return;
    const auto [m, c] = toy_.x0_given_latent(
        x_[static_cast<size_t>(t)], toy_.sigmas[static_cast<size_t>(t)]);
    auto log_density = [&, m = m, c = c](double phi) {
      const double dp = phi - toy_.phi_mean;
      return -0.5 * dp * dp / toy_.phi_variance +
             toy_.log_likelihood(phi, m, c);
    };
    phi_ = oracle::sample_on_grid(log_density, toy_.phi_grid_lo(),
                                  toy_.phi_grid_hi(), toy_.phi_grid_points,
                                  rng_);
  }

  void poison(int below) {
    for (int s = 0; s < below; ++s) {
      x_[static_cast<size_t>(s)].setConstant(
          std::numeric_limits<double>::quiet_NaN());
    }
  }

  void record(ReferenceChain& chain, int row) const {
    const Index d = toy_.dim();
    for (size_t t = 0; t < x_.size(); ++t) {
      chain.latents.row(row).segment(static_cast<Index>(t) * d, d) = x_[t];
    }
    chain.phi(row) = phi_;
  }

 private:
  const oracle::ToyModel& toy_;
  Rng& rng_;
  std::vector<Vector> x_;
  double phi_;
};

std::vector<int> range(int lo, int hi) {
  std::vector<int> out;
  for (int t = lo; t < hi; ++t) out.push_back(t);
  return out;
}

std::vector<int> all_but(int skip, int top) {
  std::vector<int> out;
  for (int t = 0; t <= top; ++t) {
    if (t != skip) out.push_back(t);
  }
  return out;
}

std::vector<int> with_front(int first, std::vector<int> rest) {
  rest.insert(rest.begin(), first);
  return rest;
}

}  // namespace

ReferenceChain run_reference_samplers(const oracle::ToyModel& toy,
                                      ReferenceVariant variant, int sweeps,
                                      Rng& rng, const InnerCounts& inner) {
  toy.validate();
  if (sweeps < 1) throw std::invalid_argument("reference samplers: sweeps < 1");
  const int top = toy.steps();
  const InnerCounts counts =
      inner.steps() == 0
          ? InnerCounts(std::vector<int>(static_cast<size_t>(top), 1))
          : inner;
  if (counts.steps() != top) {
    throw std::invalid_argument("reference samplers: M needs T entries");
  }

  ReferenceChain chain;
  chain.dim = toy.dim();
  chain.latents.resize(sweeps, (top + 1) * toy.dim());
  chain.phi.resize(sweeps);
  ToyChain state(toy, rng);

  for (int n = 0; n < sweeps; ++n) {
    switch (variant) {
      case ReferenceVariant::kSampler1:
        for (int t = top; t >= 0; --t) state.draw_latents({t}, all_but(t, top));
        state.draw_phi_full();
        break;

      case ReferenceVariant::kSampler2:
        state.draw_latents({top}, all_but(top, top));
        for (int t = top - 1; t >= 0; --t) {
          state.draw_latents({t}, all_but(t, top));
          for (int m = 1; m <= counts.at(t); ++m) {
            state.draw_phi_full();
            state.draw_latents({t}, all_but(t, top));
          }
        }
        break;

      case ReferenceVariant::kSampler3:
        state.draw_latents(with_front(top, range(0, top)), {});
        for (int t = top - 1; t >= 0; --t) {
          state.draw_latents(with_front(t, range(0, t)), range(t + 1, top + 1));
          for (int m = 1; m <= counts.at(t); ++m) {
            state.draw_phi_collapsed(t);
            if (t > 0) state.draw_latents(range(0, t), range(t, top + 1));
            state.draw_latents(with_front(t, range(0, t)),
                               range(t + 1, top + 1));
          }
        }
        break;

      case ReferenceVariant::kPcgs:
        state.draw_latents({top}, {});
        state.poison(top);
        for (int t = top - 1; t >= 0; --t) {
          state.draw_latents({t}, range(t + 1, top + 1));
          for (int m = 1; m <= counts.at(t); ++m) {
            state.draw_phi_collapsed(t);
            state.draw_latents({t}, range(t + 1, top + 1));
          }
        }
        break;
    }
    state.record(chain, n);
  }
  return chain;
}

}  // namespace gibbsddrm
