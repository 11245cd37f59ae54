#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace tsdiag {

/// Deterministic standard-normal stream. Simulators and test fixtures share
/// this class so every artifact is reproducible from a seed alone.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}

  double next() { return normal_(engine_); }

  std::vector<double> draw(std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) v = normal_(engine_);
    return out;
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace tsdiag
