#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace epic {

// SplitMix64 finalizer, used to turn (seed, stream ids) into engine seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  h = mix64(h ^ c);
  return h;
}

// Stream tags keep independent RNG streams from colliding on the same seed.
namespace stream {
inline constexpr std::uint64_t kTask = 0x7461736bULL;      // task sampling
inline constexpr std::uint64_t kEval = 0x6576616cULL;      // per-task evaluation rollout
inline constexpr std::uint64_t kUpdate = 0x75706474ULL;    // lifelong update
inline constexpr std::uint64_t kFineTune = 0x66747374ULL;  // per-task fine-tuning
inline constexpr std::uint64_t kRollout = 0x726f6c6cULL;   // rollouts inside an update
inline constexpr std::uint64_t kHoldout = 0x686f6c64ULL;   // holdout evaluation
}  // namespace stream

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  double normal(double mean, double std) {
    return std::normal_distribution<double>(mean, std)(engine_);
  }

  // Index into a probability vector by inverse-CDF on one uniform draw.
  int categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
      acc += probs[k];
      if (u < acc) return static_cast<int>(k);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// A standard-normal vector with recorded provenance: the same (seed, index)
// always reproduces the same epsilon.
struct NoiseDraw {
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
  Eigen::VectorXd epsilon;

  static NoiseDraw make(std::uint64_t seed, std::uint64_t index, int dim) {
    if (dim <= 0) throw std::invalid_argument("NoiseDraw: dim must be positive");
    NoiseDraw draw;
    draw.seed = seed;
    draw.index = index;
    draw.epsilon.resize(dim);
    Rng rng(derive_seed(seed, 0x6e6f697365ULL, index));
    for (int i = 0; i < dim; ++i) draw.epsilon[i] = rng.normal();
    return draw;
  }
};

}  // namespace epic
