#pragma once

#include "ustat/array.hpp"
#include "ustat/bounds.hpp"
#include "ustat/error.hpp"
#include "ustat/montecarlo.hpp"
#include "ustat/norms.hpp"
#include "ustat/partition.hpp"
#include "ustat/rng.hpp"
#include "ustat/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace ustat {

/// Step function on [0, T_1] x ... x [0, T_d]: constant a_i on the product of
/// the cells (t_{i_j}, t_{i_j + 1}].
class StepKernel {
public:
    StepKernel(std::vector<std::vector<double>> grids, MultiIndexArray coefficients)
        : grids_(std::move(grids)), coefficients_(std::move(coefficients)) {
        if (grids_.empty()) {
            throw ShapeError("step kernel needs at least one axis");
        }
        if (coefficients_.order() != grids_.size()) {
            throw ShapeError("coefficient order does not match the number of grids");
        }
        for (std::size_t j = 0; j < grids_.size(); ++j) {
            const auto& g = grids_[j];
            if (g.size() < 2) {
                throw ShapeError("grid " + std::to_string(j + 1) + " needs at least two breakpoints");
            }
            if (g.front() != 0.0) {
                throw DomainError("grid " + std::to_string(j + 1) + " must start at 0");
            }
            for (std::size_t k = 0; k + 1 < g.size(); ++k) {
                if (!std::isfinite(g[k + 1]) || !(g[k + 1] > g[k])) {
                    throw DomainError("grid " + std::to_string(j + 1) + " must be strictly increasing");
                }
            }
            if (coefficients_.shape()[j] != g.size() - 1) {
                throw ShapeError("coefficient axis " + std::to_string(j + 1) + " has " +
                                 std::to_string(coefficients_.shape()[j]) + " cells, grid has " +
                                 std::to_string(g.size() - 1));
            }
        }
    }

    [[nodiscard]] int order() const { return static_cast<int>(grids_.size()); }
    [[nodiscard]] const std::vector<std::vector<double>>& grids() const { return grids_; }
    [[nodiscard]] const MultiIndexArray& coefficients() const { return coefficients_; }
    [[nodiscard]] std::size_t cells(int axis) const { return grids_[static_cast<std::size_t>(axis)].size() - 1; }

    [[nodiscard]] StepKernel scaled(double c) const { return {grids_, coefficients_.scaled(c)}; }

private:
    std::vector<std::vector<double>> grids_;
    MultiIndexArray coefficients_;
};

enum class ProcessKind { poisson, independent_increments };

inline const char* to_string(ProcessKind k) {
    return k == ProcessKind::poisson ? "poisson" : "independent-increments";
}

/// Per-axis, per-cell increments of the mean measure and the variance measure.
struct ProcessSpec {
    ProcessKind kind = ProcessKind::poisson;
    std::vector<std::vector<double>> lambda_increments;
    std::vector<std::vector<double>> variance_increments;

    void validate(const StepKernel& h) const {
        if (lambda_increments.size() != static_cast<std::size_t>(h.order()) ||
            variance_increments.size() != static_cast<std::size_t>(h.order())) {
            throw ShapeError("process spec must list increments for every axis");
        }
        for (int j = 0; j < h.order(); ++j) {
            const auto& lam = lambda_increments[static_cast<std::size_t>(j)];
            const auto& var = variance_increments[static_cast<std::size_t>(j)];
            if (lam.size() != h.cells(j) || var.size() != h.cells(j)) {
                throw ShapeError("axis " + std::to_string(j + 1) + " increments do not match its cells");
            }
            for (std::size_t c = 0; c < lam.size(); ++c) {
                if (!std::isfinite(lam[c]) || !std::isfinite(var[c]) || lam[c] < 0.0 || var[c] < 0.0) {
                    throw DomainError("increments must be finite and nonnegative");
                }
                if (kind == ProcessKind::poisson && lam[c] != var[c]) {
                    throw DomainError("a Poisson process has equal mean and variance increments");
                }
            }
        }
    }

    /// Poisson process with constant rate on every axis of the kernel's grids.
    static ProcessSpec homogeneous_poisson(const StepKernel& h, double rate = 1.0) {
        if (!(rate >= 0.0) || !std::isfinite(rate)) {
            throw DomainError("rate must be finite and nonnegative");
        }
        ProcessSpec spec;
        for (const auto& g : h.grids()) {
            std::vector<double> inc;
            for (std::size_t k = 0; k + 1 < g.size(); ++k) {
                inc.push_back(rate * (g[k + 1] - g[k]));
            }
            spec.lambda_increments.push_back(inc);
            spec.variance_increments.push_back(inc);
        }
        return spec;
    }
};

/// Values indexed by the cells of the outer axes (row-major, ascending axis).
struct CellField {
    AxisSet outer;
    std::vector<std::size_t> shape;
    std::vector<double> values;

    /// Largest value over cells carrying positive variance on every outer axis.
    double supremum = 0.0;
};

/// ||h||_J as a function of the outer cells: the partition norm of the
/// coefficient block over the axes of I, each axis weighted by sqrt(dV) per cell.
inline CellField stepkernel_norm(const StepKernel& h, const ProcessSpec& spec, AxisSet inner,
                                 const Partition& partition, NormMethod method = NormMethod::automatic,
                                 const NormConfig& config = {}) {
    spec.validate(h);
    const int d = h.order();
    if (!inner.subset_of(AxisSet::full(d))) {
        throw InvalidPartition("axis set " + inner.to_string() + " exceeds the kernel order");
    }
    if (partition.ground() != inner) {
        throw InvalidPartition("partition ground set " + partition.ground().to_string() + " differs from " +
                               inner.to_string());
    }
    CellField field;
    field.outer = inner.complement(d);
    for (int l : field.outer.elements()) {
        field.shape.push_back(h.cells(l));
    }
    const auto inner_axes = inner.elements();
    const auto outer_axes = field.outer.elements();
    std::vector<std::size_t> inner_shape;
    for (int l : inner_axes) {
        inner_shape.push_back(h.cells(l));
    }
    const Partition local = inner.empty() ? Partition() : partition.localized(inner);
    const auto& a = h.coefficients();
    std::vector<std::size_t> full(static_cast<std::size_t>(d), 0);
    MixedRadix outer_odo(field.shape);
    std::size_t cell = 0;
    do {
        bool positive = true;
        for (std::size_t q = 0; q < outer_axes.size(); ++q) {
            const auto l = static_cast<std::size_t>(outer_axes[q]);
            full[l] = outer_odo[q];
            positive = positive && spec.variance_increments[l][outer_odo[q]] > 0.0;
        }
        double value = 0.0;
        if (inner.empty()) {
            value = std::abs(a.at(full));
        } else {
            std::vector<double> block;
            block.reserve(product(inner_shape));
            MixedRadix inner_odo(inner_shape);
            do {
                double w = 1.0;
                for (std::size_t q = 0; q < inner_axes.size(); ++q) {
                    const auto l = static_cast<std::size_t>(inner_axes[q]);
                    full[l] = inner_odo[q];
                    w *= std::sqrt(spec.variance_increments[l][inner_odo[q]]);
                }
                block.push_back(w * a.at(full));
            } while (inner_odo.next());
            NormConfig local_config = config;
            local_config.seed = derive_seed(config.seed, cell);
            value = partition_norm(MultiIndexArray(inner_shape, std::move(block)), local, method, local_config)
                        .value;
        }
        field.values.push_back(value);
        if (positive) {
            field.supremum = std::max(field.supremum, value);
        }
        ++cell;
    } while (outer_odo.next());
    return field;
}

/// Sup norms of every (I, J) term for the threshold bound.
inline TailTable step_tail_table(const StepKernel& h, const ProcessSpec& spec,
                                 NormMethod method = NormMethod::automatic, const NormConfig& config = {}) {
    TailTable table;
    table.order = h.order();
    for (auto& [subset, partition] : all_subset_partitions(h.order())) {
        const auto field = stepkernel_norm(h, spec, subset, partition, method, config);
        table.terms.push_back({subset, partition, h.order() - subset.size(), field.supremum});
    }
    return table;
}

/// P(|Z| > threshold(p)) <= e^-p with threshold(p) = K sum p^(#I^c + deg J / 2) sup ||h||_J.
inline BoundReport theorem8_bound(const TailTable& table, double p, double constant) {
    return tail_threshold(table, p, constant, "8");
}

inline BoundReport theorem8_bound(const StepKernel& h, const ProcessSpec& spec, double p, double constant,
                                  NormMethod method = NormMethod::automatic, const NormConfig& config = {}) {
    return theorem8_bound(step_tail_table(h, spec, method, config), p, constant);
}

/// Tail bound at level t obtained by inverting the threshold in p.
inline BoundReport theorem8_tail(const TailTable& table, double t, double constant) {
    return threshold_tail(table, t, constant, "8");
}

inline BoundReport theorem8_tail(const StepKernel& h, const ProcessSpec& spec, double t, double constant,
                                 NormMethod method = NormMethod::automatic, const NormConfig& config = {}) {
    return theorem8_tail(step_tail_table(h, spec, method, config), t, constant);
}

/// Z = sum_i a_i prod_j (dN^(j)_{i_j} - dLambda^(j)_{i_j}) with independent
/// Poisson cell counts.
inline SampleRun sample_multiple_integral(const StepKernel& h, const ProcessSpec& spec, std::uint64_t seed,
                                          std::size_t count, const SampleRequest& req = {}) {
    spec.validate(h);
    if (spec.kind != ProcessKind::poisson) {
        throw UnsupportedMethod("sampling is only implemented for Poisson processes");
    }
    const auto& a = h.coefficients();
    return detail::run_sampler(seed, count, req, [&] {
        std::vector<std::vector<double>> inc;
        for (const auto& lam : spec.lambda_increments) {
            inc.emplace_back(lam.size(), 0.0);
        }
        return [&a, &spec, inc](Rng& rng) mutable {
            for (std::size_t j = 0; j < inc.size(); ++j) {
                for (std::size_t c = 0; c < inc[j].size(); ++c) {
                    const double lam = spec.lambda_increments[j][c];
                    if (lam > 0.0) {
                        std::poisson_distribution<long long> dist(lam);
                        inc[j][c] = static_cast<double>(dist(rng)) - lam;
                    } else {
                        inc[j][c] = 0.0;
                    }
                }
            }
            return detail::full_contraction(a, inc);
        };
    });
}

struct Theorem8Row {
    double p = 0.0;
    double threshold = 0.0;
    double level = 0.0; ///< e^-p
    std::uint64_t count = 0;
    double empirical = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    CheckStatus status = CheckStatus::pass;
};

struct Theorem8Verification {
    std::vector<Theorem8Row> rows;
    bool pass = true;
    std::size_t unresolvable = 0;
};

/// Empirical P(|Z| > threshold(p)) with a 99% Wilson interval against e^-p.
inline Theorem8Verification verify_theorem8(const TailTable& table, const StepKernel& h, const ProcessSpec& spec,
                                            double constant, std::uint64_t seed, std::size_t count,
                                            const std::vector<double>& p_grid, unsigned threads = 1) {
    SampleRequest req;
    req.threads = threads;
    for (double p : p_grid) {
        req.t_grid.push_back(theorem8_bound(table, p, constant).total);
    }
    const auto run = sample_multiple_integral(h, spec, seed, count, req);
    Theorem8Verification out;
    for (std::size_t k = 0; k < p_grid.size(); ++k) {
        Theorem8Row row;
        row.p = p_grid[k];
        row.threshold = req.t_grid[k];
        row.level = std::exp(-row.p);
        row.count = run.tail_gt[k];
        row.empirical = static_cast<double>(row.count) / static_cast<double>(count);
        const auto ci = wilson_interval(row.count, count);
        row.ci_low = ci.low;
        row.ci_high = ci.high;
        if (row.level < resolvable_level(count)) {
            row.status = CheckStatus::unresolvable;
            ++out.unresolvable;
        } else {
            row.status = row.ci_high <= row.level ? CheckStatus::pass : CheckStatus::fail;
        }
        out.pass = out.pass && row.status != CheckStatus::fail;
        out.rows.push_back(row);
    }
    return out;
}

inline Theorem8Verification verify_theorem8(const StepKernel& h, const ProcessSpec& spec, double constant,
                                            std::uint64_t seed, std::size_t count,
                                            const std::vector<double>& p_grid, const NormConfig& config = {}) {
    return verify_theorem8(step_tail_table(h, spec, NormMethod::automatic, config), h, spec, constant, seed,
                           count, p_grid, config.threads);
}

/// Smallest constant K such that, on the calibration sample, the 99% upper
/// confidence limit of P(|Z| > K threshold_1(p)) is at most e^-p for every
/// resolvable p. Each instance is (required K_p, 1).
inline std::vector<FitInstance> theorem8_fit_instances(const TailTable& table, const SampleRun& run,
                                                       const std::vector<double>& p_grid) {
    if (run.samples.size() != run.count) {
        throw DomainError("calibration run must keep its samples");
    }
    std::vector<double> desc;
    desc.reserve(run.samples.size());
    for (double z : run.samples) {
        desc.push_back(std::abs(z));
    }
    std::sort(desc.begin(), desc.end(), std::greater<>());
    std::vector<FitInstance> out;
    for (double p : p_grid) {
        const double level = std::exp(-p);
        if (level < resolvable_level(run.count)) {
            continue;
        }
        // Largest k with an upper confidence limit at most e^-p.
        std::uint64_t lo = 0;
        std::uint64_t hi = run.count;
        if (wilson_interval(0, run.count).high > level) {
            continue;
        }
        while (hi - lo > 1) {
            const std::uint64_t mid = lo + (hi - lo) / 2;
            (wilson_interval(mid, run.count).high <= level ? lo : hi) = mid;
        }
        // #{|Z| > desc[lo]} <= lo.
        const double x = desc[std::min<std::size_t>(lo, desc.size() - 1)];
        const double s = threshold_value(table, p, 1.0);
        if (s <= 0.0) {
            out.push_back({x > 0.0 ? std::numeric_limits<double>::infinity() : 0.0, 1.0});
            continue;
        }
        double k = x / s;
        while (k * s < x) {
            k = std::nextafter(k, std::numeric_limits<double>::infinity());
        }
        out.push_back({k, 1.0});
    }
    return out;
}

} // namespace ustat
