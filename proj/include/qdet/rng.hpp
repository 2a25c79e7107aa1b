#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "qdet/errors.hpp"

namespace qdet {

// splitmix64: cheap, well-mixed 64-bit hash used to derive independent
// per-stream seeds from (base seed, stream id).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d49b7e1a85ec53ULL;
  return x ^ (x >> 31);
}

// Deterministic random stream. split(i) derives an independent child stream
// without consuming engine state, so Monte-Carlo trials can each get their
// own stream from a single base seed (order-independent aggregation).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x51ed2701ULL))),
        engine_(key_) {}

  RngStream split(std::uint64_t substream) const { return RngStream(key_, substream); }

  // Uniform in [0, 1).
  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Index sampled with probability weights[i] / sum(weights). Cumulative-sum
  // inversion on a single uniform draw keeps the draw pattern stable.
  int pick_weighted(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw ValidationError("pick_weighted: negative weight");
      total += w;
    }
    if (total <= 0.0) throw ValidationError("pick_weighted: weights sum to zero");
    const double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;  // u landed on the top edge
  }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
};

}  // namespace qdet
