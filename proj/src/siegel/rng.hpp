#pragma once

#include <cstdint>
#include <random>

namespace siegel {

// deterministic stream family: stream k of a master seed is independent of
// how many streams exist, so sample chunk k always sees the same draws
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9u};
  return std::mt19937_64(seq);
}

// uniform in [lo, hi); uses the engine's raw 64-bit output so the mapping is
// fixed by this code, not by libstdc++'s distribution internals
inline double uniform(std::mt19937_64& g, double lo = 0.0, double hi = 1.0) {
  double u = (g() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

}  // namespace siegel
