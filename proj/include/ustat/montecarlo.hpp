#pragma once

#include "ustat/array.hpp"
#include "ustat/bounds.hpp"
#include "ustat/error.hpp"
#include "ustat/kernel.hpp"
#include "ustat/norms.hpp"
#include "ustat/rng.hpp"
#include "ustat/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ustat {

struct SampleRequest {
    std::vector<double> p_list;
    std::vector<double> t_grid;
    bool keep_samples = false;
    unsigned threads = 1;
};

/// Streamed summary of N draws of a scalar Z.
struct SampleRun {
    std::uint64_t seed = 0;
    std::size_t count = 0;
    double mean = 0.0;
    double mean_se = 0.0;
    double second_moment = 0.0;
    double second_moment_se = 0.0;
    double max_abs = 0.0;
    std::vector<double> p_list;
    std::vector<double> moments;   ///< E|Z|^p per p
    std::vector<double> moment_se;
    std::vector<double> t_grid;
    std::vector<std::uint64_t> tail_ge; ///< #{|Z| >= t}
    std::vector<std::uint64_t> tail_gt; ///< #{|Z| > t}
    std::vector<double> samples;        ///< only when requested
};

namespace detail {

template <class Draw>
struct SampleChunk {
    Draw draw_z;
    const SampleRequest* req;
    MeanAccumulator first;
    MeanAccumulator second;
    std::vector<MeanAccumulator> powers;
    std::vector<std::uint64_t> ge;
    std::vector<std::uint64_t> gt;
    double max_abs = 0.0;
    std::vector<double> samples;

    void draw(Rng& rng) {
        const double z = draw_z(rng);
        const double az = std::abs(z);
        first.add(z);
        second.add(z * z);
        for (std::size_t k = 0; k < req->p_list.size(); ++k) {
            powers[k].add(std::pow(az, req->p_list[k]));
        }
        for (std::size_t k = 0; k < req->t_grid.size(); ++k) {
            ge[k] += az >= req->t_grid[k] ? 1 : 0;
            gt[k] += az > req->t_grid[k] ? 1 : 0;
        }
        max_abs = std::max(max_abs, az);
        if (req->keep_samples) {
            samples.push_back(z);
        }
    }
};

/// Draws N values of Z in seed-split chunks and reduces them in chunk order.
/// `make_draw()` returns a fresh per-chunk callable double(Rng&).
template <class MakeDraw>
SampleRun run_sampler(std::uint64_t seed, std::size_t count, const SampleRequest& req, MakeDraw&& make_draw) {
    if (count < 1) {
        throw DomainError("sample count must be at least 1");
    }
    using Draw = decltype(make_draw());
    auto chunks = run_chunks(seed, count, req.threads, [&] {
        SampleChunk<Draw> c{make_draw(), &req, {}, {}, {}, {}, {}, 0.0, {}};
        c.powers.resize(req.p_list.size());
        c.ge.assign(req.t_grid.size(), 0);
        c.gt.assign(req.t_grid.size(), 0);
        return c;
    });
    MeanAccumulator first;
    MeanAccumulator second;
    std::vector<MeanAccumulator> powers(req.p_list.size());
    SampleRun run;
    run.seed = seed;
    run.count = count;
    run.p_list = req.p_list;
    run.t_grid = req.t_grid;
    run.tail_ge.assign(req.t_grid.size(), 0);
    run.tail_gt.assign(req.t_grid.size(), 0);
    for (auto& c : chunks) {
        first.merge(c.first);
        second.merge(c.second);
        for (std::size_t k = 0; k < powers.size(); ++k) {
            powers[k].merge(c.powers[k]);
        }
        for (std::size_t k = 0; k < req.t_grid.size(); ++k) {
            run.tail_ge[k] += c.ge[k];
            run.tail_gt[k] += c.gt[k];
        }
        run.max_abs = std::max(run.max_abs, c.max_abs);
        if (req.keep_samples) {
            run.samples.insert(run.samples.end(), c.samples.begin(), c.samples.end());
        }
    }
    run.mean = first.mean();
    run.mean_se = first.std_error();
    run.second_moment = second.mean();
    run.second_moment_se = second.std_error();
    for (const auto& acc : powers) {
        run.moments.push_back(acc.mean());
        run.moment_se.push_back(acc.std_error());
    }
    return run;
}

} // namespace detail

/// Decoupled U-statistic Z = sum_i h_i(X^(1)_{i_1}, ..., X^(d)_{i_d}) with an
/// independent variable X^(j)_i for every axis j and index i.
inline SampleRun sample_ustatistic(const KernelEnsemble& k, std::uint64_t seed, std::size_t count,
                                   const SampleRequest& req = {}) {
    const auto d = static_cast<std::size_t>(k.order());
    const auto n = static_cast<std::size_t>(k.range());
    std::vector<std::vector<double>> cdfs;
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            cdfs.push_back(k.space(static_cast<int>(j), i).cdf());
        }
    }
    const auto atom_strides = row_major_strides(k.atom_counts());
    return detail::run_sampler(seed, count, req, [&] {
        return [&k, &cdfs, atom_strides, d, n, offset = std::vector<std::size_t>(d * n)](Rng& rng) mutable {
            for (std::size_t j = 0; j < d; ++j) {
                for (std::size_t i = 0; i < n; ++i) {
                    offset[j * n + i] = draw_from_cdf(cdfs[j * n + i], rng) * atom_strides[j];
                }
            }
            std::vector<std::size_t> digits(d, 0);
            double z = 0.0;
            for (std::size_t ii = 0; ii < k.index_count(); ++ii) {
                std::size_t aa = 0;
                for (std::size_t j = 0; j < d; ++j) {
                    aa += offset[j * n + digits[j]];
                }
                z += k.value(ii, aa);
                for (std::size_t j = d; j > 0; --j) {
                    if (++digits[j - 1] < n) {
                        break;
                    }
                    digits[j - 1] = 0;
                }
            }
            return z;
        };
    });
}

struct LawAtom {
    double value = 0.0;
    double probability = 0.0;
};

/// Exact law of Z by enumerating all prod_j m_j^n joint outcomes. Values equal
/// up to 1e-12 (relative to max(1, |v|)) are merged.
inline std::vector<LawAtom> exact_distribution(const KernelEnsemble& k, double budget = 1e7) {
    const double states = outcome_states(k, AxisSet::full(k.order()));
    if (states > budget) {
        std::ostringstream msg;
        msg << "exact distribution needs " << states << " outcome states, budget is " << budget;
        throw BudgetExceeded(msg.str());
    }
    const auto d = static_cast<std::size_t>(k.order());
    const auto n = static_cast<std::size_t>(k.range());
    const auto atom_strides = row_major_strides(k.atom_counts());
    std::vector<std::size_t> radices;
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            radices.push_back(k.atom_count(static_cast<int>(j)));
        }
    }
    std::vector<LawAtom> atoms;
    MixedRadix odo(radices);
    do {
        double prob = 1.0;
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                prob *= k.space(static_cast<int>(j), i).probs[odo[j * n + i]];
            }
        }
        if (prob == 0.0) {
            continue;
        }
        CompensatedSum z;
        MixedRadix idx(k.index_shape());
        std::size_t ii = 0;
        do {
            std::size_t aa = 0;
            for (std::size_t j = 0; j < d; ++j) {
                aa += odo[j * n + idx[j]] * atom_strides[j];
            }
            z.add(k.value(ii++, aa));
        } while (idx.next());
        atoms.push_back({z.value(), prob});
    } while (odo.next());
    std::sort(atoms.begin(), atoms.end(), [](const LawAtom& a, const LawAtom& b) { return a.value < b.value; });
    std::vector<LawAtom> merged;
    for (const auto& a : atoms) {
        if (!merged.empty() &&
            std::abs(a.value - merged.back().value) <= 1e-12 * std::max(1.0, std::abs(a.value))) {
            merged.back().probability += a.probability;
        } else {
            merged.push_back(a);
        }
    }
    return merged;
}

inline double exact_moment(const std::vector<LawAtom>& law, double p) {
    CompensatedSum s;
    for (const auto& a : law) {
        s.add(a.probability * std::pow(std::abs(a.value), p));
    }
    return s.value();
}

/// P(|Z| >= t), or P(|Z| > t) when `strict`.
inline double exact_tail(const std::vector<LawAtom>& law, double t, bool strict = false) {
    CompensatedSum s;
    for (const auto& a : law) {
        const double v = std::abs(a.value);
        if (strict ? v > t : v >= t) {
            s.add(a.probability);
        }
    }
    return s.value();
}

/// Decoupled Gaussian chaos Z = sum_i a_i g^(1)_{i_1} ... g^(d)_{i_d}.
inline SampleRun sample_gaussian_chaos(const MultiIndexArray& a, std::uint64_t seed, std::size_t count,
                                       const SampleRequest& req = {}) {
    return detail::run_sampler(seed, count, req, [&] {
        std::vector<std::vector<double>> g;
        for (auto s : a.shape()) {
            g.emplace_back(s, 0.0);
        }
        return [&a, g, normal = std::normal_distribution<double>()](Rng& rng) mutable {
            for (auto& v : g) {
                for (auto& x : v) {
                    x = normal(rng);
                }
            }
            return detail::full_contraction(a, g);
        };
    });
}

struct GaussianNormCheck {
    double empirical = 0.0;
    double std_error = 0.0;
    double rhs = 0.0;
};

/// Monte Carlo estimate of E ||(sum_k A[..., k] g_k)||_{singletons} next to
/// sum_J p^((1 + deg J - d) / 2) ||A||_J.
inline GaussianNormCheck gaussian_matrix_norm_check(const MultiIndexArray& a, double p, std::uint64_t seed,
                                                    std::size_t count, const NormConfig& config = {},
                                                    unsigned threads = 1) {
    const std::size_t d = a.order();
    if (d < 2) {
        throw DomainError("the operator-norm check needs an array of order at least 2");
    }
    if (!(p >= 2.0)) {
        throw DomainError("p must be at least 2");
    }
    GaussianNormCheck out;
    if (a.is_zero()) {
        return out;
    }
    out.rhs = gaussian_operator_norm_rhs(all_partition_norms(a, NormMethod::automatic, config), d, p);
    const std::vector<std::size_t> inner_shape(a.shape().begin(), a.shape().end() - 1);
    const std::size_t last = a.shape().back();
    const std::size_t inner_size = product(inner_shape);
    struct Chunk {
        const MultiIndexArray* a;
        std::vector<std::size_t> inner_shape;
        std::size_t last;
        std::size_t inner_size;
        NormConfig config;
        std::normal_distribution<double> normal;
        MeanAccumulator acc;
        void draw(Rng& rng) {
            std::vector<double> g(last);
            for (auto& x : g) {
                x = normal(rng);
            }
            std::vector<double> b(inner_size, 0.0);
            for (std::size_t r = 0; r < inner_size; ++r) {
                double s = 0.0;
                for (std::size_t k = 0; k < last; ++k) {
                    s += (*a)[r * last + k] * g[k];
                }
                b[r] = s;
            }
            double norm = 0.0;
            if (inner_shape.size() == 1) {
                norm = euclidean_norm(b);
            } else if (inner_shape.size() == 2) {
                Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
                    b.data(), static_cast<Eigen::Index>(inner_shape[0]), static_cast<Eigen::Index>(inner_shape[1]));
                norm = spectral_norm(m);
            } else {
                const MultiIndexArray arr(inner_shape, std::move(b));
                config.seed = rng();
                norm = partition_norm(arr, Partition::singletons(AxisSet::full(static_cast<int>(inner_shape.size()))),
                                      NormMethod::alternating, config)
                           .value;
            }
            acc.add(norm);
        }
    };
    NormConfig inner_config = config;
    inner_config.threads = 1;
    auto chunks = run_chunks(seed, count, threads, [&] {
        return Chunk{&a, inner_shape, last, inner_size, inner_config, {}, {}};
    });
    MeanAccumulator acc;
    for (const auto& c : chunks) {
        acc.merge(c.acc);
    }
    out.empirical = acc.mean();
    out.std_error = acc.std_error();
    return out;
}

/// One calibration or validation instance: the quantity a bound controls and
/// the bound evaluated with constant 1.
struct FitInstance {
    double lhs = 0.0;
    double rhs = 0.0;
};

struct FitResult {
    double constant = 0.0;
    std::vector<double> calibration_ratios;
    double max_ratio = 0.0;
    bool infeasible = false;
    std::vector<double> held_out_ratios;
    std::vector<std::size_t> violations;
};

inline double fit_ratio(const FitInstance& inst) {
    if (inst.rhs > 0.0) {
        return inst.lhs / inst.rhs;
    }
    return inst.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

/// Smallest constant that makes every calibration instance satisfy lhs <= K rhs.
inline FitResult fit_constant(const std::vector<FitInstance>& instances) {
    FitResult fit;
    for (const auto& inst : instances) {
        if (inst.rhs <= 0.0 && inst.lhs > 0.0) {
            fit.infeasible = true;
        }
        const double r = fit_ratio(inst);
        fit.calibration_ratios.push_back(r);
        fit.max_ratio = std::max(fit.max_ratio, r);
    }
    fit.constant = fit.max_ratio;
    return fit;
}

/// Records held-out ratios and flags every one above the fitted constant.
inline bool validate_constant(FitResult& fit, const std::vector<FitInstance>& held_out) {
    for (std::size_t k = 0; k < held_out.size(); ++k) {
        const double r = fit_ratio(held_out[k]);
        fit.held_out_ratios.push_back(r);
        if (r > fit.constant) {
            fit.violations.push_back(k);
        }
    }
    return fit.violations.empty();
}

/// Smallest K > 0 with min(1, K exp(-exponent / K)) >= level. K exp(-e/K) is
/// increasing in K, so bisection applies.
inline double required_tail_constant(double exponent, double level) {
    if (level <= 0.0) {
        return 0.0;
    }
    if (exponent <= 0.0) {
        return level;
    }
    auto f = [exponent](double k) { return k * std::exp(-exponent / k); };
    double lo = 0.0;
    double hi = 1.0;
    while (f(hi) < level) {
        lo = hi;
        hi *= 2.0;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        (f(mid) >= level ? hi : lo) = mid;
    }
    return hi;
}

/// Tail-bound calibration from an exact law: at every support point v > 0 of
/// |Z| the required constant for P(|Z| >= v). Each instance is (required, 1).
inline std::vector<FitInstance> tail_fit_instances(const TailTable& table, const std::vector<LawAtom>& law) {
    std::vector<double> support;
    for (const auto& a : law) {
        if (a.probability > 0.0 && std::abs(a.value) > 0.0) {
            support.push_back(std::abs(a.value));
        }
    }
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    std::vector<FitInstance> out;
    for (double v : support) {
        const double level = exact_tail(law, v);
        const double e = tail_bound(table, v, 1.0).exponent;
        out.push_back({required_tail_constant(e, level), 1.0});
    }
    return out;
}

/// Tail-bound calibration from a sample run: the required constant for the
/// 99% upper confidence limit of P(|Z| >= t) at every grid point.
inline std::vector<FitInstance> tail_fit_instances(const TailTable& table, const SampleRun& run) {
    std::vector<FitInstance> out;
    for (std::size_t k = 0; k < run.t_grid.size(); ++k) {
        const double t = run.t_grid[k];
        if (!(t > 0.0)) {
            continue;
        }
        const double level = wilson_interval(run.tail_ge[k], run.count).high;
        const double e = tail_bound(table, t, 1.0).exponent;
        out.push_back({required_tail_constant(e, level), 1.0});
    }
    return out;
}

enum class CheckStatus { pass, fail, vacuous, unresolvable };

inline const char* to_string(CheckStatus s) {
    switch (s) {
    case CheckStatus::pass:
        return "pass";
    case CheckStatus::fail:
        return "fail";
    case CheckStatus::vacuous:
        return "vacuous";
    case CheckStatus::unresolvable:
        return "unresolvable";
    }
    return "?";
}

/// Smallest probability a run of N samples is asked to resolve.
inline double resolvable_level(std::size_t count) { return 20.0 / static_cast<double>(count); }

struct MomentCheckRow {
    double p = 0.0;
    double lhs = 0.0;
    double lhs_se = 0.0;
    bool lhs_exact = true;
    double rhs = 0.0;      ///< bound at the given constant
    double rhs_unit = 0.0; ///< bound at constant 1
    double ratio = 0.0;    ///< lhs / rhs_unit
    CheckStatus status = CheckStatus::pass;
};

struct MomentVerification {
    std::vector<MomentCheckRow> rows;
    bool pass = true;
};

/// E|Z|^p (exact when the full enumeration fits the budget, Monte Carlo
/// otherwise) against the moment bound, per p.
inline MomentVerification verify_moment_bound(const KernelEnsemble& k, const std::vector<double>& p_list,
                                              double constant, const ExpectationMode& mode, std::uint64_t seed,
                                              std::size_t samples, const NormConfig& config = {}) {
    MomentVerification out;
    const bool exact_lhs = outcome_states(k, AxisSet::full(k.order())) <= mode.budget;
    std::vector<double> lhs(p_list.size());
    std::vector<double> lhs_se(p_list.size(), 0.0);
    if (exact_lhs) {
        const auto law = exact_distribution(k, mode.budget);
        for (std::size_t q = 0; q < p_list.size(); ++q) {
            lhs[q] = exact_moment(law, p_list[q]);
        }
    } else {
        SampleRequest req;
        req.p_list = p_list;
        req.threads = config.threads;
        const auto run = sample_ustatistic(k, seed, samples, req);
        lhs = run.moments;
        lhs_se = run.moment_se;
    }
    for (std::size_t q = 0; q < p_list.size(); ++q) {
        const auto rep = moment_bound(k, p_list[q], 1.0, mode, NormMethod::automatic, config);
        MomentCheckRow row;
        row.p = p_list[q];
        row.lhs = lhs[q];
        row.lhs_se = lhs_se[q];
        row.lhs_exact = exact_lhs;
        row.rhs_unit = rep.total;
        row.rhs = constant * rep.total;
        row.ratio = fit_ratio({row.lhs, row.rhs_unit});
        row.status = row.lhs <= row.rhs * (1.0 + 1e-12) ? CheckStatus::pass : CheckStatus::fail;
        out.pass = out.pass && row.status == CheckStatus::pass;
        out.rows.push_back(row);
    }
    return out;
}

struct TailCheckRow {
    double t = 0.0;
    std::uint64_t count = 0;
    double empirical = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double bound = 1.0;
    double exponent = 0.0;
    CheckStatus status = CheckStatus::pass;
};

struct TailVerification {
    std::vector<TailCheckRow> rows;
    bool pass = true;
    std::size_t unresolvable = 0;
};

/// Empirical P(|Z| >= t) with a 99% Wilson interval against the tail bound.
/// Rows with bound >= 1 are vacuous, rows with bound < 20/N unresolvable;
/// elsewhere a row passes iff the upper confidence limit is <= the bound.
inline TailVerification verify_tail_bound(const TailTable& table, const SampleRun& run, double constant,
                                          const std::string& theorem = "7") {
    TailVerification out;
    for (std::size_t k = 0; k < run.t_grid.size(); ++k) {
        TailCheckRow row;
        row.t = run.t_grid[k];
        row.count = run.tail_ge[k];
        row.empirical = static_cast<double>(row.count) / static_cast<double>(run.count);
        const auto ci = wilson_interval(row.count, run.count);
        row.ci_low = ci.low;
        row.ci_high = ci.high;
        const auto rep = tail_bound(table, row.t, constant, theorem);
        row.bound = rep.probability;
        row.exponent = rep.exponent;
        if (row.bound >= 1.0) {
            row.status = CheckStatus::vacuous;
        } else if (row.bound < resolvable_level(run.count)) {
            row.status = CheckStatus::unresolvable;
            ++out.unresolvable;
        } else {
            row.status = row.ci_high <= row.bound ? CheckStatus::pass : CheckStatus::fail;
        }
        out.pass = out.pass && row.status != CheckStatus::fail;
        out.rows.push_back(row);
    }
    return out;
}

inline TailVerification verify_tail_bound(const KernelEnsemble& k, const std::vector<double>& t_grid,
                                          double constant, std::uint64_t seed, std::size_t count,
                                          const NormConfig& config = {}, double budget = 1e7) {
    SampleRequest req;
    req.t_grid = t_grid;
    req.threads = config.threads;
    const auto run = sample_ustatistic(k, seed, count, req);
    return verify_tail_bound(tail_table(k, NormMethod::automatic, config, budget), run, constant, "7");
}

inline TailVerification verify_tail_bound(const SharedKernel& h, int range, const std::vector<double>& t_grid,
                                          double constant, std::uint64_t seed, std::size_t count,
                                          const NormConfig& config = {}, double budget = 1e7) {
    SampleRequest req;
    req.t_grid = t_grid;
    req.threads = config.threads;
    const auto run = sample_ustatistic(h.expand(range), seed, count, req);
    return verify_tail_bound(iid_tail_table(h, range, NormMethod::automatic, config, budget), run, constant,
                             "cor3");
}

} // namespace ustat
