#ifndef GIBBSDDRM_TYPES_HPP_
#define GIBBSDDRM_TYPES_HPP_

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <random>

namespace gibbsddrm {

using Index = Eigen::Index;
using Complex = std::complex<double>;
using Vector = Eigen::VectorXd;
using CVector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;

// splitmix64 finalizer; spreads nearby integers over the whole 64-bit range.
inline std::uint64_t mix_seed(std::uint64_t v) {
  std::uint64_t z = v + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seedable generator threaded explicitly through every sampling call. Two
// instances built from the same seed produce identical streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  Vector normal_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal_(engine_);
    return v;
  }

  // Independent child stream, used to hand one generator to each chain.
  Rng split() { return Rng(engine_()); }

  // Child stream named by `key`; does not advance this one.
  Rng fork(std::uint64_t key) const {
    std::mt19937_64 copy = engine_;
    return Rng(copy() ^ mix_seed(key));
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace gibbsddrm

#endif  // GIBBSDDRM_TYPES_HPP_
