#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace concert {

using Rng = std::mt19937_64;

/// Mixes a base seed with a stream index so that parallel workers (restarts,
/// trees, trials) each get an independent, schedule-free seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    return Rng{derive_seed(seed, stream)};
}

/// Uniform double in [0, 1) built from the top 53 bits, identical on every platform.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). n must be positive.
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware
/// concurrency). Rethrows the exception of the lowest failing index.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, unsigned threads = 0);

}  // namespace concert
