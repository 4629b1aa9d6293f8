#pragma once

#include "ustat/parallel.hpp"
#include "ustat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace ustat {

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    void merge(const CompensatedSum& other) {
        add(other.sum_);
        add(other.comp_);
    }
    [[nodiscard]] double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Mean of a scalar with its standard error.
struct MeanAccumulator {
    CompensatedSum sum;
    CompensatedSum sum_sq;
    std::size_t count = 0;

    void add(double x) {
        sum.add(x);
        sum_sq.add(x * x);
        ++count;
    }
    void merge(const MeanAccumulator& other) {
        sum.merge(other.sum);
        sum_sq.merge(other.sum_sq);
        count += other.count;
    }
    [[nodiscard]] double mean() const { return count == 0 ? 0.0 : sum.value() / static_cast<double>(count); }
    [[nodiscard]] double std_error() const {
        if (count < 2) {
            return 0.0;
        }
        const double n = static_cast<double>(count);
        const double m = mean();
        const double var = std::max(0.0, (sum_sq.value() - n * m * m) / (n - 1.0));
        return std::sqrt(var / n);
    }
};

/// Samples per chunk. Chunk c always draws from stream c of the run seed, so
/// the chunk layout (and every summary) is independent of the thread count.
inline constexpr std::size_t sample_chunk = 1u << 14;

/// Runs `count` draws split into fixed chunks. `make_chunk()` returns a fresh
/// accumulator-like object with `void draw(Rng&)`; the per-chunk objects are
/// returned in chunk order for a deterministic reduction.
template <class MakeChunk>
auto run_chunks(std::uint64_t seed, std::size_t count, unsigned threads, MakeChunk&& make_chunk) {
    using Chunk = decltype(make_chunk());
    const std::size_t chunks = (count + sample_chunk - 1) / sample_chunk;
    std::vector<Chunk> out;
    out.reserve(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
        out.push_back(make_chunk());
    }
    parallel_for(chunks, threads, [&](std::size_t c) {
        auto rng = make_rng(seed, c);
        const std::size_t end = std::min(count, (c + 1) * sample_chunk);
        for (std::size_t k = c * sample_chunk; k < end; ++k) {
            out[c].draw(rng);
        }
    });
    return out;
}

struct Interval {
    double low = 0.0;
    double high = 1.0;
};

/// 99% two-sided normal quantile.
inline constexpr double z99 = 2.5758293035489004;

/// Wilson score interval for a binomial proportion k/n.
inline Interval wilson_interval(std::uint64_t k, std::uint64_t n, double z = z99) {
    if (n == 0) {
        return {0.0, 1.0};
    }
    const double nn = static_cast<double>(n);
    const double phat = static_cast<double>(k) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double centre = (phat + z2 / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

} // namespace ustat
