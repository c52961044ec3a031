#include "roughlab/rng.hpp"

namespace roughlab {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64(seed ^ splitmix64(stream + 1));
}

Engine make_engine(std::uint64_t seed, std::uint64_t stream) {
  return Engine(stream_seed(seed, stream));
}

Eigen::VectorXd standard_normal(Engine& engine, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(engine);
  return z;
}

Eigen::VectorXd random_unit_vector(Engine& engine, Eigen::Index d) {
  for (;;) {
    Eigen::VectorXd v = standard_normal(engine, d);
    const double norm = v.norm();
    if (norm > 1e-12) return v / norm;
  }
}

}  // namespace roughlab
