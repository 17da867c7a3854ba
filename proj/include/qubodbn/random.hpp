#pragma once

#include <cstdint>
#include <random>

namespace qubodbn {

// Every stochastic routine takes one of these explicitly; there is no global RNG.
using Rng = std::mt19937_64;

// Independent child stream for (seed, stream_id), used to split work deterministically.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream_id = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32)};
    return Rng(seq);
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace qubodbn
