#pragma once

// Kernel ensembles (h_i) indexed by i in {0..n-1}^d on finite probability
// spaces, Hoeffding canonicalization, and the conditional partition norms of
// (h_i)_{i_I} at fixed outer indices and outcomes. On finite spaces a block
// function f with E sum |f|^2 <= 1 is a unit vector once each atom is weighted
// by sqrt(probability), so every conditional norm is an ordinary partition
// norm of the weighted embedding.

#include "ustat/array.hpp"
#include "ustat/error.hpp"
#include "ustat/index.hpp"
#include "ustat/norms.hpp"
#include "ustat/parallel.hpp"
#include "ustat/partition.hpp"
#include "ustat/rng.hpp"
#include "ustat/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ustat {

struct DiscreteSpace {
    std::vector<double> atoms;
    std::vector<double> probs;

    [[nodiscard]] std::size_t size() const { return atoms.size(); }

    void validate() const {
        if (atoms.empty()) {
            throw DomainError("a discrete space needs at least one atom");
        }
        if (atoms.size() != probs.size()) {
            throw ShapeError("atoms and probs differ in length");
        }
        double total = 0.0;
        for (std::size_t k = 0; k < probs.size(); ++k) {
            if (!std::isfinite(atoms[k]) || !std::isfinite(probs[k]) || probs[k] < 0.0) {
                throw DomainError("probabilities must be finite and nonnegative");
            }
            total += probs[k];
        }
        if (std::abs(total - 1.0) > 1e-12) {
            throw DomainError("probabilities sum to " + std::to_string(total) + ", expected 1");
        }
    }

    [[nodiscard]] std::vector<double> cdf() const {
        std::vector<double> c(probs.size());
        std::partial_sum(probs.begin(), probs.end(), c.begin());
        return c;
    }

    friend bool operator==(const DiscreteSpace&, const DiscreteSpace&) = default;

    static DiscreteSpace rademacher() { return {{-1.0, 1.0}, {0.5, 0.5}}; }
};

/// Kernels h_i for every index tuple i in {0..n-1}^d. Axis j and index i use
/// space(j, i); all spaces of one axis share an atom count m_j. The table is
/// index-major then atom-major: entry (i, a) sits at flat(i) * prod(m) + flat(a),
/// both flattenings row-major.
class KernelEnsemble {
public:
    KernelEnsemble(int order, int range, std::vector<DiscreteSpace> spaces,
                   std::vector<std::size_t> space_index, std::vector<double> table)
        : order_(order), range_(range), spaces_(std::move(spaces)),
          space_index_(std::move(space_index)), table_(std::move(table)) {
        if (order_ < 1 || order_ >= AxisSet::max_axes) {
            throw DomainError("kernel order must be between 1 and 31");
        }
        if (range_ < 1) {
            throw DomainError("index range n must be at least 1");
        }
        if (spaces_.empty()) {
            throw DomainError("at least one discrete space is required");
        }
        for (const auto& s : spaces_) {
            s.validate();
        }
        const auto cells = static_cast<std::size_t>(order_) * static_cast<std::size_t>(range_);
        if (space_index_.empty() && spaces_.size() == 1) {
            space_index_.assign(cells, 0);
        }
        if (space_index_.size() != cells) {
            throw ShapeError("space index needs one entry per (axis, index) pair");
        }
        atom_counts_.assign(static_cast<std::size_t>(order_), 0);
        for (int j = 0; j < order_; ++j) {
            for (int i = 0; i < range_; ++i) {
                const auto idx = space_index_[static_cast<std::size_t>(j * range_ + i)];
                if (idx >= spaces_.size()) {
                    throw ShapeError("space index out of range");
                }
                const auto m = spaces_[idx].size();
                auto& slot = atom_counts_[static_cast<std::size_t>(j)];
                if (slot != 0 && slot != m) {
                    throw ShapeError("all spaces on one axis must have the same atom count");
                }
                slot = m;
            }
        }
        index_count_ = 1;
        for (int j = 0; j < order_; ++j) {
            index_count_ *= static_cast<std::size_t>(range_);
        }
        atom_combinations_ = product(atom_counts_);
        if (table_.size() != index_count_ * atom_combinations_) {
            throw ShapeError("kernel table has " + std::to_string(table_.size()) + " entries, expected " +
                             std::to_string(index_count_ * atom_combinations_));
        }
        for (double v : table_) {
            if (!std::isfinite(v)) {
                throw DomainError("kernel table entries must be finite");
            }
        }
    }

    [[nodiscard]] int order() const { return order_; }
    [[nodiscard]] int range() const { return range_; }
    [[nodiscard]] const std::vector<DiscreteSpace>& spaces() const { return spaces_; }
    [[nodiscard]] const std::vector<std::size_t>& space_indices() const { return space_index_; }
    [[nodiscard]] std::size_t space_index(int axis, std::size_t i) const {
        return space_index_[static_cast<std::size_t>(axis) * static_cast<std::size_t>(range_) + i];
    }
    [[nodiscard]] const DiscreteSpace& space(int axis, std::size_t i) const {
        return spaces_[space_index(axis, i)];
    }
    [[nodiscard]] std::size_t atom_count(int axis) const { return atom_counts_[static_cast<std::size_t>(axis)]; }
    [[nodiscard]] const std::vector<std::size_t>& atom_counts() const { return atom_counts_; }
    [[nodiscard]] std::size_t index_count() const { return index_count_; }
    [[nodiscard]] std::size_t atom_combinations() const { return atom_combinations_; }
    [[nodiscard]] std::span<const double> table() const { return table_; }
    [[nodiscard]] double value(std::size_t index_flat, std::size_t atom_flat) const {
        return table_[index_flat * atom_combinations_ + atom_flat];
    }
    [[nodiscard]] std::vector<std::size_t> index_shape() const {
        return std::vector<std::size_t>(static_cast<std::size_t>(order_), static_cast<std::size_t>(range_));
    }

    [[nodiscard]] KernelEnsemble with_table(std::vector<double> table) const {
        return {order_, range_, spaces_, space_index_, std::move(table)};
    }
    [[nodiscard]] KernelEnsemble scaled(double c) const {
        auto t = table_;
        for (auto& v : t) {
            v *= c;
        }
        return with_table(std::move(t));
    }

    friend bool operator==(const KernelEnsemble&, const KernelEnsemble&) = default;

private:
    int order_;
    int range_;
    std::vector<DiscreteSpace> spaces_;
    std::vector<std::size_t> space_index_;
    std::vector<double> table_;
    std::vector<std::size_t> atom_counts_;
    std::size_t index_count_ = 0;
    std::size_t atom_combinations_ = 0;
};

/// One kernel h shared by every index tuple, with every variable drawn i.i.d.
/// from `space`. `table` is h over atom tuples, row-major, m^d entries.
struct SharedKernel {
    int order = 1;
    DiscreteSpace space;
    std::vector<double> table;

    [[nodiscard]] KernelEnsemble expand(int range) const {
        space.validate();
        std::size_t cells = 1;
        for (int j = 0; j < order; ++j) {
            cells *= static_cast<std::size_t>(range);
        }
        std::vector<double> full;
        full.reserve(cells * table.size());
        for (std::size_t c = 0; c < cells; ++c) {
            full.insert(full.end(), table.begin(), table.end());
        }
        return {order, range, {space}, {}, std::move(full)};
    }
};

namespace detail {

/// Calls f(base, stride) once per fiber along `axis` of a row-major array.
template <class F>
void for_each_fiber(const std::vector<std::size_t>& shape, std::size_t axis, F&& f) {
    auto outer = shape;
    outer[axis] = 1;
    const auto strides = row_major_strides(shape);
    MixedRadix odo(outer);
    do {
        std::size_t base = 0;
        for (std::size_t k = 0; k < shape.size(); ++k) {
            base += odo[k] * strides[k];
        }
        f(base, strides[axis]);
    } while (odo.next());
}

inline std::vector<std::size_t> unflatten(std::size_t flat, int order, std::size_t radix) {
    std::vector<std::size_t> out(static_cast<std::size_t>(order));
    for (int k = order - 1; k >= 0; --k) {
        out[static_cast<std::size_t>(k)] = flat % radix;
        flat /= radix;
    }
    return out;
}

} // namespace detail

/// Applies prod_j (Id - E_j) to every h_i, where E_j averages the j-th atom
/// slot under that slot's space. The result is canonical.
inline KernelEnsemble canonicalize(const KernelEnsemble& k) {
    auto table = std::vector<double>(k.table().begin(), k.table().end());
    const auto& m = k.atom_counts();
    const std::size_t block = k.atom_combinations();
    for (std::size_t ii = 0; ii < k.index_count(); ++ii) {
        const auto idx = detail::unflatten(ii, k.order(), static_cast<std::size_t>(k.range()));
        double* h = table.data() + ii * block;
        for (int j = 0; j < k.order(); ++j) {
            const auto& probs = k.space(j, idx[static_cast<std::size_t>(j)]).probs;
            detail::for_each_fiber(m, static_cast<std::size_t>(j), [&](std::size_t base, std::size_t stride) {
                double mean = 0.0;
                for (std::size_t a = 0; a < probs.size(); ++a) {
                    mean += probs[a] * h[base + a * stride];
                }
                for (std::size_t a = 0; a < probs.size(); ++a) {
                    h[base + a * stride] -= mean;
                }
            });
        }
    }
    return k.with_table(std::move(table));
}

/// Largest conditional mean |E_j h_i| and where it occurs.
struct CanonicalityReport {
    double max_abs_mean = 0.0;
    int axis = 0;
    std::vector<std::size_t> index;
};

inline CanonicalityReport canonicality(const KernelEnsemble& k) {
    CanonicalityReport rep;
    rep.index.assign(static_cast<std::size_t>(k.order()), 0);
    const auto& m = k.atom_counts();
    const std::size_t block = k.atom_combinations();
    for (std::size_t ii = 0; ii < k.index_count(); ++ii) {
        const auto idx = detail::unflatten(ii, k.order(), static_cast<std::size_t>(k.range()));
        const double* h = k.table().data() + ii * block;
        for (int j = 0; j < k.order(); ++j) {
            const auto& probs = k.space(j, idx[static_cast<std::size_t>(j)]).probs;
            detail::for_each_fiber(m, static_cast<std::size_t>(j), [&](std::size_t base, std::size_t stride) {
                double mean = 0.0;
                for (std::size_t a = 0; a < probs.size(); ++a) {
                    mean += probs[a] * h[base + a * stride];
                }
                if (std::abs(mean) > rep.max_abs_mean) {
                    rep.max_abs_mean = std::abs(mean);
                    rep.axis = j;
                    rep.index = idx;
                }
            });
        }
    }
    return rep;
}

inline bool is_canonical(const KernelEnsemble& k, double tol = 1e-10) {
    if (!(tol > 0.0)) {
        throw DomainError("canonicality tolerance must be positive");
    }
    return canonicality(k).max_abs_mean <= tol;
}

/// Fixed outcomes of the variables X_i^(l) for l in `axes`: atoms[l][i].
struct OutcomeAssignment {
    AxisSet axes;
    std::vector<std::vector<std::size_t>> atoms;
};

namespace detail {

inline void check_outer(const KernelEnsemble& k, AxisSet inner, std::span<const std::size_t> outer_index,
                        const OutcomeAssignment& w) {
    const AxisSet outer = inner.complement(k.order());
    if (!inner.subset_of(AxisSet::full(k.order()))) {
        throw DomainError("axis set exceeds the kernel order");
    }
    if (w.axes != outer) {
        throw DomainError("outcome assignment must cover exactly the complement axes " + outer.to_string());
    }
    if (outer_index.size() != static_cast<std::size_t>(k.order())) {
        throw ShapeError("outer index needs one slot per axis");
    }
    for (int l : outer.elements()) {
        const auto ul = static_cast<std::size_t>(l);
        if (outer_index[ul] >= static_cast<std::size_t>(k.range())) {
            throw DomainError("outer index out of range");
        }
        if (w.atoms.size() <= ul || w.atoms[ul].size() != static_cast<std::size_t>(k.range())) {
            throw ShapeError("outcome assignment needs one atom per index on every outer axis");
        }
        for (auto a : w.atoms[ul]) {
            if (a >= k.atom_count(l)) {
                throw DomainError("assigned atom out of range");
            }
        }
    }
}

} // namespace detail

/// Array with one axis per l in I (size n * m_l, digit i_l * m_l + a_l) whose
/// entries are h_i(a) * prod_{l in I} sqrt(p^(l, i_l)(a_l)); axes outside I are
/// fixed at `outer_index` with atoms taken from `w`.
inline MultiIndexArray weighted_embedding(const KernelEnsemble& k, AxisSet inner,
                                          std::span<const std::size_t> outer_index,
                                          const OutcomeAssignment& w) {
    if (inner.empty()) {
        throw DomainError("weighted embedding needs a nonempty axis set");
    }
    detail::check_outer(k, inner, outer_index, w);
    const auto axes = inner.elements();
    const auto n = static_cast<std::size_t>(k.range());
    std::vector<std::size_t> shape;
    std::vector<std::size_t> radices;
    for (int l : axes) {
        shape.push_back(n * k.atom_count(l));
        radices.push_back(n);
        radices.push_back(k.atom_count(l));
    }
    const auto atom_strides = row_major_strides(k.atom_counts());
    const auto index_strides = row_major_strides(k.index_shape());
    std::size_t base_index = 0;
    std::size_t base_atom = 0;
    for (int l : inner.complement(k.order()).elements()) {
        const auto ul = static_cast<std::size_t>(l);
        base_index += outer_index[ul] * index_strides[ul];
        base_atom += w.atoms[ul][outer_index[ul]] * atom_strides[ul];
    }
    std::vector<double> values;
    values.reserve(product(shape));
    MixedRadix odo(radices);
    do {
        std::size_t ii = base_index;
        std::size_t aa = base_atom;
        double weight = 1.0;
        for (std::size_t q = 0; q < axes.size(); ++q) {
            const auto l = static_cast<std::size_t>(axes[q]);
            const auto i = odo[2 * q];
            const auto a = odo[2 * q + 1];
            ii += i * index_strides[l];
            aa += a * atom_strides[l];
            weight *= std::sqrt(k.space(axes[q], i).probs[a]);
        }
        values.push_back(weight == 0.0 ? 0.0 : k.value(ii, aa) * weight);
    } while (odo.next());
    return {std::move(shape), std::move(values)};
}

/// ||(h_i)_{i_I}||_J at fixed i_{I^c} = outer_index and outer outcomes w. For
/// I empty this is |h_i(a)| with every axis taken from the outer data.
inline double conditional_partition_norm(const KernelEnsemble& k, AxisSet inner, const Partition& partition,
                                         std::span<const std::size_t> outer_index, const OutcomeAssignment& w,
                                         NormMethod method = NormMethod::automatic,
                                         const NormConfig& config = {}) {
    if (partition.ground() != inner) {
        throw InvalidPartition("partition ground set " + partition.ground().to_string() +
                               " differs from " + inner.to_string());
    }
    if (inner.empty()) {
        detail::check_outer(k, inner, outer_index, w);
        const auto atom_strides = row_major_strides(k.atom_counts());
        const auto index_strides = row_major_strides(k.index_shape());
        std::size_t ii = 0;
        std::size_t aa = 0;
        for (int l = 0; l < k.order(); ++l) {
            const auto ul = static_cast<std::size_t>(l);
            ii += outer_index[ul] * index_strides[ul];
            aa += w.atoms[ul][outer_index[ul]] * atom_strides[ul];
        }
        return std::abs(k.value(ii, aa));
    }
    const auto emb = weighted_embedding(k, inner, outer_index, w);
    return partition_norm(emb, partition.localized(inner), method, config).value;
}

/// Conditional norms for every (i_{I^c}, a_{I^c}) at once. The norm at fixed
/// outer data depends only on the outer indices and, for each outer axis l,
/// the atom of X^(l)_{i_l}, so this table is all the expectation and supremum
/// computations need.
class ConditionalNormTable {
public:
    ConditionalNormTable(const KernelEnsemble& k, AxisSet inner, const Partition& partition,
                         NormMethod method, const NormConfig& config, double budget)
        : inner_(inner), outer_(inner.complement(k.order())), range_(static_cast<std::size_t>(k.range())) {
        if (partition.ground() != inner) {
            throw InvalidPartition("partition ground set " + partition.ground().to_string() +
                                   " differs from " + inner.to_string());
        }
        for (int l : outer_.elements()) {
            radices_.push_back(range_);
            radices_.push_back(k.atom_count(l));
        }
        const auto entries = product(radices_);
        if (static_cast<double>(entries) > budget) {
            throw BudgetExceeded("conditional norm table needs " + std::to_string(entries) +
                                 " norm evaluations, budget is " + std::to_string(budget));
        }
        values_.assign(entries, 0.0);
        positive_.assign(entries, 1);
        const auto outer_axes = outer_.elements();
        parallel_for(entries, config.threads, [&](std::size_t e) {
            std::vector<std::size_t> digits(radices_.size());
            std::size_t rest = e;
            for (std::size_t q = radices_.size(); q > 0; --q) {
                digits[q - 1] = rest % radices_[q - 1];
                rest /= radices_[q - 1];
            }
            std::vector<std::size_t> outer_index(static_cast<std::size_t>(k.order()), 0);
            OutcomeAssignment w{outer_, std::vector<std::vector<std::size_t>>(static_cast<std::size_t>(k.order()))};
            for (std::size_t q = 0; q < outer_axes.size(); ++q) {
                const auto l = static_cast<std::size_t>(outer_axes[q]);
                outer_index[l] = digits[2 * q];
                w.atoms[l].assign(range_, 0);
                w.atoms[l][digits[2 * q]] = digits[2 * q + 1];
                if (k.space(outer_axes[q], digits[2 * q]).probs[digits[2 * q + 1]] == 0.0) {
                    positive_[e] = 0;
                }
            }
            NormConfig local = config;
            local.threads = 1;
            local.seed = derive_seed(config.seed, e);
            values_[e] = conditional_partition_norm(k, inner, partition, outer_index, w, method, local);
        });
    }

    [[nodiscard]] AxisSet inner() const { return inner_; }
    [[nodiscard]] AxisSet outer() const { return outer_; }
    [[nodiscard]] std::span<const double> values() const { return values_; }

    /// Entry for outer indices/atoms given as interleaved (i_l, a_l) digits.
    [[nodiscard]] double at(std::span<const std::size_t> digits) const {
        std::size_t flat = 0;
        for (std::size_t q = 0; q < radices_.size(); ++q) {
            flat = flat * radices_[q] + digits[q];
        }
        return values_[flat];
    }

    /// Largest entry over outer atoms of positive probability.
    [[nodiscard]] double supremum() const {
        double best = 0.0;
        for (std::size_t e = 0; e < values_.size(); ++e) {
            if (positive_[e]) {
                best = std::max(best, values_[e]);
            }
        }
        return best;
    }

    /// max over i_{I^c} of the norm when the outer variables take `state`,
    /// where state[q][i] is the atom of X^(l_q)_i for the q-th outer axis.
    [[nodiscard]] double max_over_outer_indices(const std::vector<std::vector<std::size_t>>& state) const {
        const std::size_t outer_count = state.size();
        if (outer_count == 0) {
            return values_[0];
        }
        std::vector<std::size_t> idx_radices(outer_count, range_);
        MixedRadix odo(idx_radices);
        double best = 0.0;
        do {
            std::size_t flat = 0;
            for (std::size_t q = 0; q < outer_count; ++q) {
                flat = flat * radices_[2 * q] + odo[q];
                flat = flat * radices_[2 * q + 1] + state[q][odo[q]];
            }
            best = std::max(best, values_[flat]);
        } while (odo.next());
        return best;
    }

private:
    AxisSet inner_;
    AxisSet outer_;
    std::size_t range_;
    std::vector<std::size_t> radices_;
    std::vector<double> values_;
    std::vector<char> positive_;
};

struct ExpectationMode {
    enum class Kind { exact, montecarlo };
    Kind kind = Kind::exact;
    std::size_t samples = 100000;
    std::uint64_t seed = 0;
    double budget = 1e7;

    static ExpectationMode exact(double budget = 1e7) { return {Kind::exact, 0, 0, budget}; }
    static ExpectationMode montecarlo(std::size_t samples, std::uint64_t seed, double budget = 1e7) {
        return {Kind::montecarlo, samples, seed, budget};
    }
};

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
    bool exact = true;
};

/// Number of joint outcomes of the variables on `axes`: prod_{l in axes} m_l^n.
inline double outcome_states(const KernelEnsemble& k, AxisSet axes) {
    double states = 1.0;
    for (int l : axes.elements()) {
        states *= std::pow(static_cast<double>(k.atom_count(l)), k.range());
    }
    return states;
}

/// E_{I^c} max_{i_{I^c}} ||(h_i)_{i_I}||_J^p from a precomputed table.
inline Estimate expected_max_power(const KernelEnsemble& k, const ConditionalNormTable& table, double p,
                                   const ExpectationMode& mode, unsigned threads = 1) {
    if (!(p >= 2.0)) {
        throw DomainError("moment order p must be at least 2");
    }
    const auto outer_axes = table.outer().elements();
    const auto n = static_cast<std::size_t>(k.range());
    if (outer_axes.empty()) {
        return {std::pow(table.values()[0], p), 0.0, true};
    }
    std::vector<std::vector<std::size_t>> state(outer_axes.size(), std::vector<std::size_t>(n, 0));
    if (mode.kind == ExpectationMode::Kind::exact) {
        const double states = outcome_states(k, table.outer());
        if (states > mode.budget) {
            std::ostringstream msg;
            msg << "exact enumeration needs " << states << " outcome states, budget is " << mode.budget
                << "; use montecarlo mode";
            throw BudgetExceeded(msg.str());
        }
        std::vector<std::size_t> radices;
        for (int l : outer_axes) {
            for (std::size_t i = 0; i < n; ++i) {
                radices.push_back(k.atom_count(l));
            }
        }
        CompensatedSum total;
        MixedRadix odo(radices);
        do {
            double prob = 1.0;
            for (std::size_t q = 0; q < outer_axes.size(); ++q) {
                for (std::size_t i = 0; i < n; ++i) {
                    const auto a = odo[q * n + i];
                    state[q][i] = a;
                    prob *= k.space(outer_axes[q], i).probs[a];
                }
            }
            if (prob > 0.0) {
                total.add(prob * std::pow(table.max_over_outer_indices(state), p));
            }
        } while (odo.next());
        return {total.value(), 0.0, true};
    }

    std::vector<std::vector<std::vector<double>>> cdfs(outer_axes.size());
    for (std::size_t q = 0; q < outer_axes.size(); ++q) {
        for (std::size_t i = 0; i < n; ++i) {
            cdfs[q].push_back(k.space(outer_axes[q], i).cdf());
        }
    }
    struct Chunk {
        const ConditionalNormTable* table;
        const std::vector<std::vector<std::vector<double>>>* cdfs;
        std::vector<std::vector<std::size_t>> state;
        double p;
        MeanAccumulator acc;
        void draw(Rng& rng) {
            for (std::size_t q = 0; q < state.size(); ++q) {
                for (std::size_t i = 0; i < state[q].size(); ++i) {
                    state[q][i] = draw_from_cdf((*cdfs)[q][i], rng);
                }
            }
            acc.add(std::pow(table->max_over_outer_indices(state), p));
        }
    };
    auto chunks = run_chunks(mode.seed, mode.samples, threads,
                             [&] { return Chunk{&table, &cdfs, state, p, {}}; });
    MeanAccumulator acc;
    for (const auto& c : chunks) {
        acc.merge(c.acc);
    }
    return {acc.mean(), acc.std_error(), false};
}

inline Estimate expected_max_conditional_norm(const KernelEnsemble& k, AxisSet inner, const Partition& partition,
                                              double p, const ExpectationMode& mode = ExpectationMode::exact(),
                                              NormMethod method = NormMethod::automatic,
                                              const NormConfig& config = {}) {
    if (!(p >= 2.0)) {
        throw DomainError("moment order p must be at least 2");
    }
    if (mode.kind == ExpectationMode::Kind::exact) {
        const double states = outcome_states(k, inner.complement(k.order()));
        if (states > mode.budget) {
            std::ostringstream msg;
            msg << "exact enumeration needs " << states << " outcome states, budget is " << mode.budget
                << "; use montecarlo mode";
            throw BudgetExceeded(msg.str());
        }
    }
    const ConditionalNormTable table(k, inner, partition, method, config, mode.budget);
    return expected_max_power(k, table, p, mode, config.threads);
}

/// ess sup over outer outcomes and max over outer indices of the conditional norm.
inline double sup_conditional_norm(const KernelEnsemble& k, AxisSet inner, const Partition& partition,
                                   NormMethod method = NormMethod::automatic, const NormConfig& config = {},
                                   double budget = 1e7) {
    return ConditionalNormTable(k, inner, partition, method, config, budget).supremum();
}

} // namespace ustat
