#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace ustat {

using Rng = std::mt19937_64;

/// Counter-based seed derivation: stream k of a base seed gets its own
/// well-mixed 64-bit seed, so work split into chunks reproduces the serial run.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    return Rng(derive_seed(seed, stream));
}

/// Uniform draw from the unit sphere in R^n.
inline std::vector<double> random_unit_vector(std::size_t n, Rng& rng) {
    std::normal_distribution<double> normal;
    std::vector<double> x(n);
    double norm = 0.0;
    while (norm == 0.0) {
        norm = 0.0;
        for (auto& v : x) {
            v = normal(rng);
            norm += v * v;
        }
        norm = std::sqrt(norm);
    }
    for (auto& v : x) {
        v /= norm;
    }
    return x;
}

/// Inverse-CDF draw from a finite distribution given by its cumulative sums.
inline std::size_t draw_from_cdf(const std::vector<double>& cdf, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng) * cdf.back();
    std::size_t k = 0;
    while (k + 1 < cdf.size() && u >= cdf[k]) {
        ++k;
    }
    return k;
}

} // namespace ustat
