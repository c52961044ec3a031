#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace roughlab {

/// SplitMix64 finalizer. Bijective on 64-bit words.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed of stream `stream` under base seed `seed`.
///
/// Streams are derived as splitmix64(seed ^ splitmix64(stream + 1)), so the
/// per-stream seeds are a pure function of (seed, stream) and independent of
/// the order in which streams are consumed.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

using Engine = std::mt19937_64;

Engine make_engine(std::uint64_t seed, std::uint64_t stream = 0);

Eigen::VectorXd standard_normal(Engine& engine, Eigen::Index n);

/// Uniform direction on the unit sphere of R^d.
Eigen::VectorXd random_unit_vector(Engine& engine, Eigen::Index d);

}  // namespace roughlab
