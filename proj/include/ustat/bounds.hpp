#pragma once

// Right-hand sides of the moment and tail bounds for canonical U-statistics
// Z = sum_i h_i. Every bound is a sum or minimum over pairs (I, J), I a subset
// of the axes and J a partition of I, of a power of p (or t) times a
// conditional partition norm. The universal constant is always an input.

#include "ustat/array.hpp"
#include "ustat/error.hpp"
#include "ustat/kernel.hpp"
#include "ustat/norms.hpp"
#include "ustat/partition.hpp"
#include "ustat/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ustat {

struct BoundTerm {
    AxisSet subset;
    Partition partition;
    /// Power of p attached to the norm per unit p: #I^c + deg(J)/2.
    double p_exponent = 0.0;
    /// Moment form: (E max ||.||^p)^(1/p). Tail form: sup of the conditional norm.
    double norm_value = 0.0;
    /// Moment form: p^(p * p_exponent) * E max ||.||^p. Tail form: (t / norm)^rate.
    /// Threshold form: p^p_exponent * norm.
    double term_value = 0.0;
    double std_error = 0.0;
    /// Tail form only: terms with zero norm impose no constraint.
    bool active = true;
};

struct BoundReport {
    std::string theorem;
    std::string parameter_name;
    double parameter = 0.0;
    double constant = 1.0;
    std::vector<BoundTerm> terms;
    /// Moment and threshold forms: constant * sum of terms.
    double total = 0.0;
    std::optional<std::size_t> dominant;
    /// Tail form: min over active terms of (t / norm)^(2 / (deg + 2 #I^c)).
    double exponent = 0.0;
    /// Tail form: min(1, constant * exp(-exponent / constant)). Threshold form: e^-p.
    double probability = 1.0;
    bool exact = true;
    std::vector<std::string> warnings;
};

inline double moment_weight_exponent(int outer_size, int degree) {
    return static_cast<double>(outer_size) + 0.5 * static_cast<double>(degree);
}

/// Moment bound: constant * sum over (I, J) of
///   p^(p (#I^c + deg J / 2)) * E_{I^c} max_{i_{I^c}} ||(h_i)_{i_I}||_J^p,
/// with the I = {} term using |h_i| for the norm.
inline BoundReport moment_bound(const KernelEnsemble& k, double p, double constant,
                                const ExpectationMode& mode = ExpectationMode::exact(),
                                NormMethod method = NormMethod::automatic, const NormConfig& config = {}) {
    if (!(p >= 2.0)) {
        throw DomainError("moment order p must be at least 2");
    }
    if (!(constant > 0.0)) {
        throw DomainError("bound constant must be positive");
    }
    BoundReport rep;
    rep.theorem = "6";
    rep.parameter_name = "p";
    rep.parameter = p;
    rep.constant = constant;
    rep.exact = mode.kind == ExpectationMode::Kind::exact;
    const auto canon = canonicality(k);
    if (canon.max_abs_mean > 1e-10) {
        rep.warnings.push_back("kernel is not canonical: max conditional mean " +
                               std::to_string(canon.max_abs_mean));
    }
    CompensatedSum sum;
    for (auto& [subset, partition] : all_subset_partitions(k.order())) {
        BoundTerm term;
        term.subset = subset;
        term.partition = partition;
        const int outer = k.order() - subset.size();
        term.p_exponent = moment_weight_exponent(outer, partition.degree());
        Estimate est;
        try {
            const ConditionalNormTable table(k, subset, partition, method, config, mode.budget);
            est = expected_max_power(k, table, p, mode, config.threads);
        } catch (const BudgetExceeded& e) {
            throw BudgetExceeded(std::string(e.what()) + " (I = " + subset.to_string() +
                                 ", J = " + partition.to_string() + ")");
        }
        const double weight = std::pow(p, p * term.p_exponent);
        term.norm_value = std::pow(est.value, 1.0 / p);
        term.term_value = weight * est.value;
        term.std_error = weight * est.std_error;
        sum.add(term.term_value);
        rep.terms.push_back(std::move(term));
    }
    rep.total = constant * sum.value();
    for (std::size_t k2 = 0; k2 < rep.terms.size(); ++k2) {
        if (!rep.dominant || rep.terms[k2].term_value > rep.terms[*rep.dominant].term_value) {
            rep.dominant = k2;
        }
    }
    return rep;
}

/// Sup-norms ||| (h_i)_{i_I} ||_J ||_inf for every (I, J): the data behind the
/// tail bounds and the threshold form.
struct TailTerm {
    AxisSet subset;
    Partition partition;
    int outer_size = 0;
    double sup_norm = 0.0;
};

struct TailTable {
    int order = 1;
    std::vector<TailTerm> terms;
};

inline TailTable tail_table(const KernelEnsemble& k, NormMethod method = NormMethod::automatic,
                            const NormConfig& config = {}, double budget = 1e7) {
    TailTable table;
    table.order = k.order();
    for (auto& [subset, partition] : all_subset_partitions(k.order())) {
        try {
            const double s = sup_conditional_norm(k, subset, partition, method, config, budget);
            table.terms.push_back({subset, partition, k.order() - subset.size(), s});
        } catch (const BudgetExceeded& e) {
            throw BudgetExceeded(std::string(e.what()) + " (I = " + subset.to_string() +
                                 ", J = " + partition.to_string() + ")");
        }
    }
    return table;
}

/// Tail table for a shared kernel on n i.i.d. samples, using
/// ||| (h_i)_{i_I} ||_J ||_inf = n^(#I/2) ||| h ||_J ||_inf. The norms of h are
/// computed once on the n = 1 ensemble, so the cost does not grow with n.
inline TailTable iid_tail_table(const SharedKernel& h, int range, NormMethod method = NormMethod::automatic,
                                const NormConfig& config = {}, double budget = 1e7) {
    if (range < 1) {
        throw DomainError("index range n must be at least 1");
    }
    auto table = tail_table(h.expand(1), method, config, budget);
    for (auto& term : table.terms) {
        term.sup_norm *= std::pow(static_cast<double>(range), 0.5 * term.subset.size());
    }
    return table;
}

/// Rate 2 / (deg J + 2 #I^c) of one tail term.
inline double tail_rate(const TailTerm& term) {
    return 2.0 / (static_cast<double>(term.partition.degree()) + 2.0 * static_cast<double>(term.outer_size));
}

/// Tail form: P(|Z| >= t) <= K exp(-(1/K) min (t / norm)^rate), clamped to 1.
inline BoundReport tail_bound(const TailTable& table, double t, double constant, std::string theorem = "7") {
    if (!(t >= 0.0)) {
        throw DomainError("tail level t must be nonnegative");
    }
    if (!(constant > 0.0)) {
        throw DomainError("bound constant must be positive");
    }
    BoundReport rep;
    rep.theorem = std::move(theorem);
    rep.parameter_name = "t";
    rep.parameter = t;
    rep.constant = constant;
    double exponent = std::numeric_limits<double>::infinity();
    for (const auto& tt : table.terms) {
        BoundTerm term;
        term.subset = tt.subset;
        term.partition = tt.partition;
        term.p_exponent = moment_weight_exponent(tt.outer_size, tt.partition.degree());
        term.norm_value = tt.sup_norm;
        term.active = tt.sup_norm > 0.0;
        if (term.active) {
            term.term_value = std::pow(t / tt.sup_norm, tail_rate(tt));
            if (!rep.dominant || term.term_value < exponent) {
                exponent = term.term_value;
                rep.dominant = rep.terms.size();
            }
        }
        rep.terms.push_back(std::move(term));
    }
    if (t == 0.0) {
        rep.exponent = 0.0;
        rep.probability = std::min(1.0, constant);
    } else if (!rep.dominant) {
        // Every norm vanishes, so Z = 0 almost surely.
        rep.exponent = std::numeric_limits<double>::infinity();
        rep.probability = 0.0;
    } else {
        rep.exponent = exponent;
        rep.probability = std::min(1.0, constant * std::exp(-exponent / constant));
    }
    return rep;
}

inline BoundReport tail_bound(const KernelEnsemble& k, double t, double constant,
                              NormMethod method = NormMethod::automatic, const NormConfig& config = {},
                              double budget = 1e7) {
    return tail_bound(tail_table(k, method, config, budget), t, constant, "7");
}

inline BoundReport iid_tail_bound(const SharedKernel& h, int range, double t, double constant,
                                  NormMethod method = NormMethod::automatic, const NormConfig& config = {},
                                  double budget = 1e7) {
    return tail_bound(iid_tail_table(h, range, method, config, budget), t, constant, "cor3");
}

/// Threshold form: P(|Z| > K sum p^(#I^c + deg J / 2) sup-norm) <= e^-p.
inline BoundReport tail_threshold(const TailTable& table, double p, double constant, std::string theorem = "7") {
    if (!(p >= 2.0)) {
        throw DomainError("p must be at least 2");
    }
    if (!(constant > 0.0)) {
        throw DomainError("bound constant must be positive");
    }
    BoundReport rep;
    rep.theorem = std::move(theorem);
    rep.parameter_name = "p";
    rep.parameter = p;
    rep.constant = constant;
    CompensatedSum sum;
    for (const auto& tt : table.terms) {
        BoundTerm term;
        term.subset = tt.subset;
        term.partition = tt.partition;
        term.p_exponent = moment_weight_exponent(tt.outer_size, tt.partition.degree());
        term.norm_value = tt.sup_norm;
        term.term_value = std::pow(p, term.p_exponent) * tt.sup_norm;
        sum.add(term.term_value);
        if (!rep.dominant || term.term_value > rep.terms[*rep.dominant].term_value) {
            rep.dominant = rep.terms.size();
        }
        rep.terms.push_back(std::move(term));
    }
    rep.total = constant * sum.value();
    rep.probability = std::exp(-p);
    return rep;
}

inline double threshold_value(const TailTable& table, double p, double constant) {
    double s = 0.0;
    for (const auto& tt : table.terms) {
        s += std::pow(p, moment_weight_exponent(tt.outer_size, tt.partition.degree())) * tt.sup_norm;
    }
    return constant * s;
}

inline constexpr double threshold_p_min = 2.0;
inline constexpr double threshold_p_max = 64.0;

/// Tail bound at level t from the threshold form: the largest p in [2, 64]
/// with threshold(p) <= t (found by bisection to 1e-9 in threshold units)
/// gives P(|Z| > t) <= e^-p. Below threshold(2) the bound is vacuous.
inline BoundReport threshold_tail(const TailTable& table, double t, double constant, std::string theorem = "7") {
    if (!(t >= 0.0)) {
        throw DomainError("tail level t must be nonnegative");
    }
    auto rep = tail_threshold(table, threshold_p_min, constant, std::move(theorem));
    rep.parameter_name = "t";
    rep.parameter = t;
    const double at_min = threshold_value(table, threshold_p_min, constant);
    if (at_min == 0.0) {
        rep.exponent = t > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        rep.probability = t > 0.0 ? 0.0 : 1.0;
        rep.total = 0.0;
        return rep;
    }
    if (t < at_min) {
        rep.exponent = 0.0;
        rep.probability = 1.0;
        rep.total = at_min;
        return rep;
    }
    double lo = threshold_p_min;
    double hi = threshold_p_max;
    if (threshold_value(table, hi, constant) <= t) {
        lo = hi;
    } else {
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (threshold_value(table, mid, constant) <= t) {
                lo = mid;
            } else {
                hi = mid;
            }
            if (threshold_value(table, hi, constant) - threshold_value(table, lo, constant) <= 1e-9 * t) {
                break;
            }
        }
    }
    auto at_p = tail_threshold(table, lo, constant, rep.theorem);
    at_p.parameter_name = "t";
    at_p.parameter = t;
    at_p.exponent = lo;
    at_p.probability = std::exp(-lo);
    return at_p;
}

struct RegimePoint {
    double t = 0.0;
    AxisSet subset;
    Partition partition;
    double exponent = 0.0;
};

/// The (I, J) attaining the tail-bound minimum at each t, ties broken by
/// (|I|, encoding of J). Terms with zero norm never dominate.
inline std::vector<RegimePoint> dominant_regime(const TailTable& table, const std::vector<double>& t_grid) {
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        if (!(t_grid[k] > 0.0) || (k > 0 && !(t_grid[k] > t_grid[k - 1]))) {
            throw DomainError("t grid must be positive and strictly ascending");
        }
    }
    std::vector<RegimePoint> out;
    for (double t : t_grid) {
        const auto rep = tail_bound(table, t, 1.0);
        RegimePoint pt{t, {}, {}, rep.exponent};
        if (rep.dominant) {
            pt.subset = rep.terms[*rep.dominant].subset;
            pt.partition = rep.terms[*rep.dominant].partition;
        }
        out.push_back(std::move(pt));
    }
    return out;
}

struct ChaosTerm {
    Partition partition;
    double norm = 0.0;
    double term = 0.0;
};

struct ChaosEstimate {
    double lower = 0.0;
    double upper = 0.0;
    std::vector<ChaosTerm> terms;
};

struct PartitionNormValue {
    Partition partition;
    double norm = 0.0;
};

/// ||A||_J for every partition J of all axes of A.
inline std::vector<PartitionNormValue> all_partition_norms(const MultiIndexArray& a,
                                                           NormMethod method = NormMethod::automatic,
                                                           const NormConfig& config = {}) {
    std::vector<PartitionNormValue> out;
    for (auto& p : enumerate_partitions(AxisSet::full(static_cast<int>(a.order())))) {
        const double v = partition_norm(a, p, method, config).value;
        out.push_back({std::move(p), v});
    }
    return out;
}

/// Gaussian chaos moment scale sum_J p^(deg J / 2) ||A||_J. The two-sided
/// estimates differ only by multiplicative constants, so lower = upper here.
inline ChaosEstimate gaussian_chaos_estimate(const std::vector<PartitionNormValue>& norms, double p) {
    if (!(p >= 2.0)) {
        throw DomainError("p must be at least 2");
    }
    ChaosEstimate est;
    double total = 0.0;
    for (const auto& pn : norms) {
        const double term = std::pow(p, 0.5 * pn.partition.degree()) * pn.norm;
        total += term;
        est.terms.push_back({pn.partition, pn.norm, term});
    }
    est.lower = total;
    est.upper = total;
    return est;
}

inline ChaosEstimate gaussian_chaos_estimate(const MultiIndexArray& a, double p,
                                             NormMethod method = NormMethod::automatic,
                                             const NormConfig& config = {}) {
    return gaussian_chaos_estimate(all_partition_norms(a, method, config), p);
}

/// sum_J p^((1 + deg J - d) / 2) ||A||_J, the scale bounding the expected
/// injective norm of the (d-1)-array sum_k A[..., k] g_k.
inline double gaussian_operator_norm_rhs(const std::vector<PartitionNormValue>& norms, std::size_t order,
                                         double p) {
    double total = 0.0;
    for (const auto& pn : norms) {
        total += std::pow(p, 0.5 * (1.0 + pn.partition.degree() - static_cast<double>(order))) * pn.norm;
    }
    return total;
}

} // namespace ustat
