#pragma once

#include <cmath>
#include <cstdint>

#include "grid.hpp"

namespace mfglq {

/// Counter-based random numbers: every variate is a pure function of
/// (seed, stream, counter), so adding agents or reordering loops never
/// perturbs the noise another agent sees (common-random-numbers property).
namespace crng {

/// SplitMix64 avalanche; full 64-bit mixing.
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t hash3(uint64_t seed, uint64_t stream, uint64_t counter) {
    uint64_t h = mix64(seed ^ 0x243f6a8885a308d3ULL);
    h = mix64(h ^ stream);
    h = mix64(h ^ counter);
    return h;
}

/// Uniform in (0, 1]; never returns 0 so it is safe under log().
inline double uniform_oc(uint64_t seed, uint64_t stream, uint64_t counter) {
    const uint64_t h = hash3(seed, stream, counter);
    return (static_cast<double>(h >> 11) + 1.0) * (1.0 / 9007199254740992.0);
}

/// Standard normal via Box-Muller on two counter-derived uniforms.
/// Pure function of (seed, stream, counter).
inline double normal(uint64_t seed, uint64_t stream, uint64_t counter) {
    const double u1 = uniform_oc(seed, stream, 2 * counter);
    const double u2 = uniform_oc(seed, stream, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

/// Stable stream identifiers. Classes: 0 = major, 1 = minor leaders,
/// 2 = followers, 3+ = auxiliary streams (Monte-Carlo paths, perturbations).
inline uint64_t stream_id(uint64_t cls, uint64_t index) {
    return (cls << 40) ^ index;
}

/// Derive an independent sub-seed (e.g. per replication).
inline uint64_t subseed(uint64_t seed, uint64_t tag) {
    return mix64(seed ^ mix64(tag ^ 0x5851f42d4c957f2dULL));
}

} // namespace crng

/// Lazy bundle of scalar Brownian increments on a grid.  increment(source, k)
/// is the increment of W_source over [t_k, t_{k+1}], reproducible from
/// (seed, source, k) alone; nothing is stored.
struct BrownianBundle {
    TimeGrid grid;
    uint64_t seed = 0;
    double sqrt_dt = 0.0;

    BrownianBundle() = default;
    BrownianBundle(const TimeGrid& g, uint64_t s)
        : grid(g), seed(s), sqrt_dt(std::sqrt(g.dt)) {}

    double increment(uint64_t source, int k) const {
        return sqrt_dt * crng::normal(seed, source, static_cast<uint64_t>(k));
    }

    /// Standard-normal draw attached to the bundle's seed but outside the
    /// increment counter space (used for initial conditions).
    double normal_draw(uint64_t stream, uint64_t counter) const {
        return crng::normal(seed, crng::mix64(stream ^ 0xa0761d6478bd642fULL), counter);
    }
};

} // namespace mfglq
