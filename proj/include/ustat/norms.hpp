#pragma once

// Partition norms of dense arrays: for a partition {J_1..J_k} of the axes,
//   ||A||_J = sup { sum_i a_i x1[i_J1] ... xk[i_Jk] : each x_j a unit vector },
// where x_j is indexed by the combined (lexicographically flattened) axes of J_j.
// One block gives the Frobenius norm, two blocks the spectral norm of an
// unfolding, singletons the injective norm.

#include "ustat/array.hpp"
#include "ustat/error.hpp"
#include "ustat/index.hpp"
#include "ustat/parallel.hpp"
#include "ustat/partition.hpp"
#include "ustat/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ustat {

enum class NormMethod {
    exact2,      ///< Frobenius / SVD; degree at most 2
    alternating, ///< block alternating maximization with random restarts
    oracle,      ///< many random starts, each polished; ground truth at tiny sizes
    automatic,   ///< exact2 when possible, alternating otherwise
};

struct NormConfig {
    int restarts = 50;
    int max_iterations = 500;
    double tolerance = 1e-10;
    std::size_t samples = 100000;
    int polish_iterations = 500;
    int max_rerandomizations = 10;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct NormCertificate {
    double value = 0.0;
    std::vector<std::vector<double>> witnesses;
    bool converged = true;
    int iterations = 0;
    bool degenerate = false;
};

/// Regroups the axes of `a` so that group g becomes output axis g. Inside a
/// group, source axes are flattened lexicographically in ascending axis order.
/// The groups must be a disjoint cover of all axes.
inline MultiIndexArray group_axes(const MultiIndexArray& a, std::span<const AxisSet> groups) {
    const int order = static_cast<int>(a.order());
    AxisSet seen;
    for (auto g : groups) {
        if (g.empty() || (seen & g).bits() != 0) {
            throw InvalidPartition("axis groups must be nonempty and disjoint");
        }
        seen = seen | g;
    }
    if (seen != AxisSet::full(order)) {
        throw InvalidPartition("axis groups must cover every axis of the array");
    }
    const auto& shape = a.shape();
    std::vector<std::size_t> out_shape;
    std::vector<std::size_t> axis_group(shape.size());
    std::vector<std::size_t> axis_stride(shape.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::size_t size = 1;
        const auto axes = groups[g].elements();
        for (auto it = axes.rbegin(); it != axes.rend(); ++it) {
            axis_group[static_cast<std::size_t>(*it)] = g;
            axis_stride[static_cast<std::size_t>(*it)] = size;
            size *= shape[static_cast<std::size_t>(*it)];
        }
        out_shape.push_back(size);
    }
    const auto out_strides = row_major_strides(out_shape);
    std::vector<double> out(a.size());
    MixedRadix odo(shape);
    std::size_t flat = 0;
    do {
        std::size_t target = 0;
        for (std::size_t k = 0; k < shape.size(); ++k) {
            target += odo[k] * axis_stride[k] * out_strides[axis_group[k]];
        }
        out[target] = a[flat++];
    } while (odo.next());
    return {std::move(out_shape), std::move(out)};
}

/// Unfolds `a` into a matrix with rows indexed by `rows` and columns by `cols`.
inline MultiIndexArray matricize(const MultiIndexArray& a, AxisSet rows, AxisSet cols) {
    const std::vector<AxisSet> groups{rows, cols};
    return group_axes(a, groups);
}

inline Eigen::MatrixXd to_matrix(const MultiIndexArray& m) {
    if (m.order() != 2) {
        throw ShapeError("expected a 2-index array");
    }
    const auto rows = static_cast<Eigen::Index>(m.shape()[0]);
    const auto cols = static_cast<Eigen::Index>(m.shape()[1]);
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            out(r, c) = m[static_cast<std::size_t>(r * cols + c)];
        }
    }
    return out;
}

inline double spectral_norm(const Eigen::MatrixXd& m) {
    if (m.size() == 0) {
        return 0.0;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}

inline double euclidean_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) {
        s += v * v;
    }
    return std::sqrt(s);
}

namespace detail {

/// Contracts a grouped tensor against every witness except `skip`.
inline std::vector<double> contract_except(const MultiIndexArray& t,
                                           const std::vector<std::vector<double>>& x,
                                           std::size_t skip) {
    const auto& shape = t.shape();
    std::vector<double> out(shape[skip], 0.0);
    MixedRadix odo(shape);
    std::size_t flat = 0;
    do {
        double w = t[flat++];
        if (w != 0.0) {
            for (std::size_t k = 0; k < shape.size(); ++k) {
                if (k != skip) {
                    w *= x[k][odo[k]];
                }
            }
            out[odo[skip]] += w;
        }
    } while (odo.next());
    return out;
}

inline double full_contraction(const MultiIndexArray& t, const std::vector<std::vector<double>>& x) {
    const auto last = contract_except(t, x, t.order() - 1);
    double s = 0.0;
    for (std::size_t k = 0; k < last.size(); ++k) {
        s += last[k] * x.back()[k];
    }
    return s;
}

struct AscentResult {
    double value = 0.0;
    std::vector<std::vector<double>> witnesses;
    bool converged = false;
    int iterations = 0;
};

/// Block coordinate ascent from the given start. Fixing every block but one,
/// the optimal free block is the normalized contraction, so the form value
/// never decreases.
inline AscentResult alternating_ascent(const MultiIndexArray& t, std::vector<std::vector<double>> x,
                                       int max_iterations, const NormConfig& config, Rng& rng) {
    const double frob = t.frobenius_norm();
    AscentResult r;
    double previous = -1.0;
    int rerandomized = 0;
    bool gave_up = false;
    for (int it = 1; it <= max_iterations && !gave_up; ++it) {
        r.iterations = it;
        double value = 0.0;
        bool restarted_block = false;
        for (std::size_t j = 0; j < x.size(); ++j) {
            auto c = contract_except(t, x, j);
            const double nc = euclidean_norm(c);
            if (nc <= 1e-14 * frob) {
                if (++rerandomized > config.max_rerandomizations) {
                    gave_up = true;
                    break;
                }
                x[j] = random_unit_vector(x[j].size(), rng);
                restarted_block = true;
                continue;
            }
            rerandomized = 0;
            for (auto& v : c) {
                v /= nc;
            }
            x[j] = std::move(c);
            value = nc;
        }
        if (restarted_block || gave_up) {
            previous = -1.0;
            continue;
        }
        if (previous >= 0.0 && value - previous <= config.tolerance * value) {
            r.converged = true;
            break;
        }
        previous = value;
    }
    const double final_value = full_contraction(t, x);
    if (final_value < 0.0) {
        for (auto& v : x[0]) {
            v = -v;
        }
    }
    r.value = std::abs(final_value);
    r.witnesses = std::move(x);
    return r;
}

inline std::vector<std::vector<double>> random_witnesses(const MultiIndexArray& t, Rng& rng) {
    std::vector<std::vector<double>> x;
    for (auto s : t.shape()) {
        x.push_back(random_unit_vector(s, rng));
    }
    return x;
}

/// Best result over `count` independent runs. Runs are grouped in fixed-size
/// chunks whose layout does not depend on the thread count; ties keep the
/// lowest run index.
template <class Run>
AscentResult best_of(std::size_t count, unsigned threads, Run&& run) {
    constexpr std::size_t chunk = 64;
    const std::size_t chunks = (count + chunk - 1) / chunk;
    std::vector<AscentResult> best(chunks);
    std::vector<char> has(chunks, 0);
    parallel_for(chunks, threads, [&](std::size_t c) {
        const std::size_t end = std::min(count, (c + 1) * chunk);
        for (std::size_t k = c * chunk; k < end; ++k) {
            auto r = run(k);
            if (!has[c] || r.value > best[c].value) {
                best[c] = std::move(r);
                has[c] = 1;
            }
        }
    });
    AscentResult out;
    bool any = false;
    for (std::size_t c = 0; c < chunks; ++c) {
        if (has[c] && (!any || best[c].value > out.value)) {
            out = std::move(best[c]);
            any = true;
        }
    }
    return out;
}

inline NormCertificate degenerate_certificate(const MultiIndexArray& grouped) {
    NormCertificate cert;
    cert.value = 0.0;
    cert.converged = true;
    cert.degenerate = true;
    for (auto s : grouped.shape()) {
        std::vector<double> e(s, 0.0);
        e[0] = 1.0;
        cert.witnesses.push_back(std::move(e));
    }
    return cert;
}

} // namespace detail

/// Evaluates the multilinear form sum_i a_i x1[i_J1] ... xk[i_Jk] exactly.
inline double multilinear_eval(const MultiIndexArray& a, const Partition& partition,
                               const std::vector<std::vector<double>>& witnesses) {
    const auto grouped = group_axes(a, partition.blocks());
    if (witnesses.size() != grouped.order()) {
        throw ShapeError("expected one witness per block");
    }
    for (std::size_t k = 0; k < witnesses.size(); ++k) {
        if (witnesses[k].size() != grouped.shape()[k]) {
            throw ShapeError("witness " + std::to_string(k + 1) + " has length " +
                             std::to_string(witnesses[k].size()) + ", block needs " +
                             std::to_string(grouped.shape()[k]));
        }
    }
    return detail::full_contraction(grouped, witnesses);
}

/// Computes ||a||_partition. Degree 1 and 2 are exact (Frobenius, top singular
/// value); for degree >= 3 the alternating and oracle methods return certified
/// lower bounds, whose witnesses reproduce the value.
inline NormCertificate partition_norm(const MultiIndexArray& a, const Partition& partition,
                                      NormMethod method = NormMethod::automatic,
                                      const NormConfig& config = {}) {
    if (partition.ground() != AxisSet::full(static_cast<int>(a.order()))) {
        throw InvalidPartition("partition must cover all " + std::to_string(a.order()) +
                               " axes of the array, got " + partition.to_string());
    }
    const int degree = partition.degree();
    if (method == NormMethod::automatic) {
        method = degree <= 2 ? NormMethod::exact2 : NormMethod::alternating;
    }
    if (method == NormMethod::exact2 && degree > 2) {
        throw UnsupportedMethod("exact2 handles partitions of degree at most 2, got " +
                                std::to_string(degree));
    }
    const auto grouped = group_axes(a, partition.blocks());
    if (grouped.is_zero()) {
        return detail::degenerate_certificate(grouped);
    }

    NormCertificate cert;
    if (method == NormMethod::exact2) {
        cert.converged = true;
        cert.iterations = 1;
        if (degree == 1) {
            const double f = grouped.frobenius_norm();
            std::vector<double> w(grouped.values().begin(), grouped.values().end());
            for (auto& v : w) {
                v /= f;
            }
            cert.value = f;
            cert.witnesses.push_back(std::move(w));
            return cert;
        }
        const auto m = to_matrix(grouped);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        cert.value = svd.singularValues()(0);
        const Eigen::VectorXd u = svd.matrixU().col(0).normalized();
        const Eigen::VectorXd v = svd.matrixV().col(0).normalized();
        cert.witnesses.emplace_back(u.data(), u.data() + u.size());
        cert.witnesses.emplace_back(v.data(), v.data() + v.size());
        if (detail::full_contraction(grouped, cert.witnesses) < 0.0) {
            for (auto& x : cert.witnesses[0]) {
                x = -x;
            }
        }
        return cert;
    }

    detail::AscentResult best;
    if (method == NormMethod::alternating) {
        const auto restarts = static_cast<std::size_t>(std::max(1, config.restarts));
        best = detail::best_of(restarts, config.threads, [&](std::size_t k) {
            auto rng = make_rng(config.seed, k);
            auto start = detail::random_witnesses(grouped, rng);
            return detail::alternating_ascent(grouped, std::move(start), config.max_iterations, config, rng);
        });
    } else {
        best = detail::best_of(std::max<std::size_t>(1, config.samples), config.threads, [&](std::size_t k) {
            auto rng = make_rng(config.seed ^ 0x6f7261636c65ULL, k);
            auto start = detail::random_witnesses(grouped, rng);
            const double raw = std::abs(detail::full_contraction(grouped, start));
            auto polished =
                detail::alternating_ascent(grouped, start, config.polish_iterations, config, rng);
            if (raw > polished.value) {
                if (detail::full_contraction(grouped, start) < 0.0) {
                    for (auto& v : start[0]) {
                        v = -v;
                    }
                }
                polished.value = raw;
                polished.witnesses = std::move(start);
            }
            return polished;
        });
    }
    cert.value = best.value;
    cert.witnesses = std::move(best.witnesses);
    cert.converged = best.converged;
    cert.iterations = best.iterations;
    return cert;
}

inline double partition_norm_value(const MultiIndexArray& a, const Partition& partition,
                                   NormMethod method = NormMethod::automatic,
                                   const NormConfig& config = {}) {
    return partition_norm(a, partition, method, config).value;
}

} // namespace ustat
