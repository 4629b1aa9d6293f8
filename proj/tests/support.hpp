#pragma once

#include "ustat/ustat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace ustat::testing {

inline MultiIndexArray random_array(std::vector<std::size_t> shape, std::uint64_t seed) {
    auto rng = make_rng(seed, 0x5eed);
    std::normal_distribution<double> normal;
    std::vector<double> v(product(shape));
    for (auto& x : v) {
        x = normal(rng);
    }
    return {std::move(shape), std::move(v)};
}

/// Random probabilities bounded away from zero.
inline DiscreteSpace random_space(std::size_t atoms, Rng& rng) {
    std::uniform_real_distribution<double> u(0.2, 1.0);
    DiscreteSpace s;
    double total = 0.0;
    for (std::size_t k = 0; k < atoms; ++k) {
        s.atoms.push_back(static_cast<double>(k));
        s.probs.push_back(u(rng));
        total += s.probs.back();
    }
    for (auto& p : s.probs) {
        p /= total;
    }
    // Make the sum exact to the last bit.
    double head = 0.0;
    for (std::size_t k = 0; k + 1 < atoms; ++k) {
        head += s.probs[k];
    }
    s.probs.back() = 1.0 - head;
    return s;
}

/// Random kernel with independent spaces per (axis, index) and m atoms on every axis.
inline KernelEnsemble random_kernel(int d, int n, std::size_t m, std::uint64_t seed) {
    auto rng = make_rng(seed, 0x6b65726e);
    std::vector<DiscreteSpace> spaces;
    std::vector<std::size_t> index;
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < n; ++i) {
            index.push_back(spaces.size());
            spaces.push_back(random_space(m, rng));
        }
    }
    std::normal_distribution<double> normal;
    std::size_t entries = 1;
    for (int j = 0; j < d; ++j) {
        entries *= static_cast<std::size_t>(n) * m;
    }
    std::vector<double> table(entries);
    for (auto& x : table) {
        x = normal(rng);
    }
    return {d, n, std::move(spaces), std::move(index), std::move(table)};
}

inline KernelEnsemble random_canonical_kernel(int d, int n, std::size_t m, std::uint64_t seed) {
    return canonicalize(random_kernel(d, n, m, seed));
}

/// h(x, y) = x y on Rademacher atoms.
inline SharedKernel rademacher_xy() { return {2, DiscreteSpace::rademacher(), {1.0, -1.0, -1.0, 1.0}}; }

/// h(x) = x on Rademacher atoms.
inline SharedKernel rademacher_x() { return {1, DiscreteSpace::rademacher(), {-1.0, 1.0}}; }

/// |a - b| <= tol * max(|a|, |b|).
inline bool near_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

} // namespace ustat::testing
