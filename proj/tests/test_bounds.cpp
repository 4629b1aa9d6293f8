#include "oracles.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace ustat;
using ustat::testing::near_rel;
using ustat::testing::rademacher_x;
using ustat::testing::rademacher_xy;
using ustat::testing::random_canonical_kernel;
using ustat::testing::random_kernel;

namespace {

/// Shared canonical kernel of order d on one random m-atom space.
SharedKernel random_shared(int d, std::size_t m, std::uint64_t seed) {
    auto rng = make_rng(seed, 0x736861);
    const auto space = ustat::testing::random_space(m, rng);
    std::normal_distribution<double> normal;
    std::size_t entries = 1;
    for (int j = 0; j < d; ++j) {
        entries *= m;
    }
    std::vector<double> table(entries);
    for (auto& x : table) {
        x = normal(rng);
    }
    const auto canon = canonicalize(SharedKernel{d, space, table}.expand(1));
    return {d, space, std::vector<double>(canon.table().begin(), canon.table().end())};
}

const TailTerm& find_term(const TailTable& t, AxisSet subset, const Partition& partition) {
    for (const auto& term : t.terms) {
        if (term.subset == subset && term.partition == partition) {
            return term;
        }
    }
    throw std::runtime_error("term not found");
}

} // namespace

TEST(MomentBound, RademacherSumExample) {
    // h(x) = x, n = 2, p = 4: 4^4 * 1 + 4^2 * (sqrt 2)^4 = 256 + 64.
    const auto rep = moment_bound(rademacher_x().expand(2), 4.0, 1.0);
    EXPECT_NEAR(rep.total, 320.0, 1e-9);
    ASSERT_EQ(rep.terms.size(), 2u);
    EXPECT_TRUE(rep.exact);
    EXPECT_TRUE(rep.warnings.empty());
    double empty_term = 0.0;
    double full_term = 0.0;
    for (const auto& t : rep.terms) {
        (t.subset.size() == 0 ? empty_term : full_term) = t.term_value;
    }
    EXPECT_NEAR(empty_term, 256.0, 1e-9);
    EXPECT_NEAR(full_term, 64.0, 1e-9);
}

TEST(MomentBound, ZeroKernelGivesZero) {
    const auto k = SharedKernel{2, DiscreteSpace::rademacher(), {0.0, 0.0, 0.0, 0.0}}.expand(2);
    const auto rep = moment_bound(k, 3.0, 1.0);
    EXPECT_EQ(rep.total, 0.0);
}

TEST(MomentBound, ScalesAsPowerOfConstant) {
    const auto k = random_canonical_kernel(2, 2, 2, 11);
    for (double c : {-2.5, 0.3, 4.0}) {
        for (double p : {2.0, 3.5}) {
            const double base = moment_bound(k, p, 1.0).total;
            const double scaled = moment_bound(k.scaled(c), p, 1.0).total;
            EXPECT_TRUE(near_rel(scaled, std::pow(std::abs(c), p) * base, 1e-8)) << c << " " << p;
        }
    }
}

TEST(MomentBound, MatchesExpandedFunctionSpaceFormula) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        for (int d : {1, 2}) {
            const auto k = random_canonical_kernel(d, 2, 2, 100 + seed);
            for (double p : {2.0, 3.0, 5.0}) {
                const double got = moment_bound(k, p, 1.0).total;
                const double want = oracle::expanded_moment_rhs(k, p);
                EXPECT_TRUE(near_rel(got, want, 1e-9)) << "d=" << d << " seed=" << seed << " p=" << p
                                                       << " got " << got << " want " << want;
            }
        }
    }
}

TEST(MomentBound, ConstantIsMultiplicative) {
    const auto k = random_canonical_kernel(2, 2, 2, 5);
    EXPECT_TRUE(near_rel(moment_bound(k, 3.0, 7.0).total, 7.0 * moment_bound(k, 3.0, 1.0).total, 1e-12));
}

TEST(MomentBound, WarnsOnNonCanonicalKernel) {
    const auto k = random_kernel(2, 2, 2, 9);
    const auto rep = moment_bound(k, 2.0, 1.0);
    ASSERT_FALSE(rep.warnings.empty());
    EXPECT_NE(rep.warnings.front().find("canonical"), std::string::npos);
}

TEST(MomentBound, RejectsInvalidParameters) {
    const auto k = rademacher_x().expand(2);
    EXPECT_THROW(moment_bound(k, 1.5, 1.0), DomainError);
    EXPECT_THROW(moment_bound(k, 2.0, 0.0), DomainError);
}

TEST(MomentBound, BudgetErrorNamesTheTerm) {
    const auto k = random_canonical_kernel(2, 3, 3, 2);
    try {
        moment_bound(k, 2.0, 1.0, ExpectationMode::exact(10.0));
        FAIL() << "expected BudgetExceeded";
    } catch (const BudgetExceeded& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("I = "), std::string::npos) << msg;
        EXPECT_NE(msg.find("J = "), std::string::npos) << msg;
    }
}

TEST(MomentBound, MonteCarloAgreesWithExact) {
    const auto k = random_canonical_kernel(2, 2, 3, 21);
    const auto exact = moment_bound(k, 3.0, 1.0);
    const auto mc = moment_bound(k, 3.0, 1.0, ExpectationMode::montecarlo(200000, 4));
    EXPECT_FALSE(mc.exact);
    ASSERT_EQ(exact.terms.size(), mc.terms.size());
    for (std::size_t i = 0; i < exact.terms.size(); ++i) {
        const double tol = 5.0 * mc.terms[i].std_error + 1e-12 * exact.terms[i].term_value;
        EXPECT_NEAR(mc.terms[i].term_value, exact.terms[i].term_value, tol)
            << exact.terms[i].subset.to_string() << " " << exact.terms[i].partition.to_string();
    }
}

TEST(TailBound, AtZeroIsMinOfOneAndConstant) {
    const auto k = rademacher_xy().expand(2);
    EXPECT_EQ(tail_bound(k, 0.0, 0.4).probability, 0.4);
    EXPECT_EQ(tail_bound(k, 0.0, 3.0).probability, 1.0);
}

TEST(TailBound, ProductKernelExponents) {
    // All sup-norms equal 1 at n = 1, so the exponents are t^rate.
    const auto table = tail_table(rademacher_xy().expand(1));
    EXPECT_EQ(table.terms.size(), 5u);
    for (const auto& term : table.terms) {
        EXPECT_NEAR(term.sup_norm, 1.0, 1e-9) << term.subset.to_string() << " " << term.partition.to_string();
    }
    for (double t : {2.0, 5.0, 40.0}) {
        const auto rep = tail_bound(table, t, 1.0);
        ASSERT_TRUE(rep.dominant.has_value());
        EXPECT_EQ(rep.terms[*rep.dominant].subset.size(), 0);
        EXPECT_NEAR(rep.exponent, std::sqrt(t), 1e-8);
        EXPECT_NEAR(rep.probability, std::exp(-std::sqrt(t)), 1e-9);
    }
    const auto small = tail_bound(table, 0.5, 1.0);
    EXPECT_NEAR(small.exponent, 0.25, 1e-9);
    EXPECT_EQ(small.terms[*small.dominant].partition, Partition::parse("{1,2}"));
}

TEST(TailBound, NonincreasingInT) {
    const auto table = tail_table(random_canonical_kernel(2, 2, 2, 31));
    double prev = 1.0;
    for (double t = 0.0; t < 30.0; t += 0.25) {
        const double pr = tail_bound(table, t, 1.0).probability;
        EXPECT_LE(pr, prev + 1e-15) << t;
        prev = pr;
    }
}

TEST(TailBound, ZeroKernelHasZeroTail) {
    const auto k = SharedKernel{2, DiscreteSpace::rademacher(), {0.0, 0.0, 0.0, 0.0}}.expand(3);
    const auto rep = tail_bound(k, 0.1, 1.0);
    EXPECT_EQ(rep.probability, 0.0);
    EXPECT_FALSE(rep.dominant.has_value());
    for (const auto& t : rep.terms) {
        EXPECT_FALSE(t.active);
    }
}

TEST(TailBound, RejectsInvalidParameters) {
    const auto table = tail_table(rademacher_x().expand(2));
    EXPECT_THROW(tail_bound(table, -1.0, 1.0), DomainError);
    EXPECT_THROW(tail_bound(table, 1.0, -1.0), DomainError);
}

TEST(IidTail, MatchesExpandedEnsemble) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        for (int d : {1, 2}) {
            const auto h = random_shared(d, 2, 40 + seed);
            for (int n : {1, 2, 3}) {
                const auto iid = iid_tail_table(h, n);
                const auto full = tail_table(h.expand(n));
                ASSERT_EQ(iid.terms.size(), full.terms.size());
                for (std::size_t i = 0; i < iid.terms.size(); ++i) {
                    EXPECT_TRUE(near_rel(iid.terms[i].sup_norm, full.terms[i].sup_norm, 1e-6))
                        << "d=" << d << " n=" << n << " " << iid.terms[i].subset.to_string() << " "
                        << iid.terms[i].partition.to_string();
                }
            }
        }
    }
}

TEST(IidTail, CrossCheckAtLargerRange) {
    const auto h = random_shared(2, 2, 77);
    const auto a = iid_tail_bound(h, 4, 8.0, 1.0);
    const auto b = tail_bound(h.expand(4), 8.0, 1.0);
    EXPECT_TRUE(near_rel(a.probability, b.probability, 1e-6));
    EXPECT_EQ(a.theorem, "cor3");
}

TEST(IidTail, AtRangeOneEqualsGeneralBound) {
    const auto h = random_shared(2, 3, 78);
    for (double t : {0.5, 2.0, 9.0}) {
        EXPECT_TRUE(near_rel(iid_tail_bound(h, 1, t, 1.3).probability, tail_bound(h.expand(1), t, 1.3).probability,
                             1e-12));
    }
}

TEST(IidTail, DoublingRangeScalesBySubsetSize) {
    const auto h = random_shared(2, 2, 79);
    const auto a = iid_tail_table(h, 3);
    const auto b = iid_tail_table(h, 6);
    for (std::size_t i = 0; i < a.terms.size(); ++i) {
        const double factor = std::pow(2.0, 0.5 * a.terms[i].subset.size());
        EXPECT_TRUE(near_rel(b.terms[i].sup_norm, factor * a.terms[i].sup_norm, 1e-12));
    }
}

TEST(GaussianChaos, Examples) {
    EXPECT_NEAR(gaussian_chaos_estimate(MultiIndexArray({2}, {1.0, 0.0}), 2.0).upper, std::sqrt(2.0), 1e-12);
    for (std::size_t n : {2u, 3u, 5u}) {
        std::vector<double> v(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            v[i * n + i] = 1.0;
        }
        const auto est = gaussian_chaos_estimate(MultiIndexArray({n, n}, v), 2.0);
        EXPECT_NEAR(est.upper, std::sqrt(2.0 * static_cast<double>(n)) + 2.0, 1e-8) << n;
        EXPECT_EQ(est.lower, est.upper);
        EXPECT_EQ(est.terms.size(), 2u);
    }
}

TEST(GaussianChaos, HomogeneousAndNondecreasingInP) {
    const auto a = ustat::testing::random_array({3, 2, 2}, 8);
    const double base = gaussian_chaos_estimate(a, 3.0).upper;
    std::vector<double> v(a.values().begin(), a.values().end());
    for (auto& x : v) {
        x *= -2.5;
    }
    const MultiIndexArray scaled({3, 2, 2}, v);
    EXPECT_TRUE(near_rel(gaussian_chaos_estimate(scaled, 3.0).upper, 2.5 * base, 1e-6));
    double prev = 0.0;
    for (double p : {2.0, 3.0, 4.5, 8.0}) {
        const double v = gaussian_chaos_estimate(a, p).upper;
        EXPECT_GE(v, prev);
        prev = v;
    }
    EXPECT_THROW(gaussian_chaos_estimate(a, 1.0), DomainError);
}

TEST(DominantRegime, SingleNonzeroTermAlwaysDominates) {
    TailTable table;
    table.order = 1;
    table.terms.push_back({AxisSet{}, Partition{}, 1, 0.0});
    table.terms.push_back({AxisSet::of({0}), Partition::parse("{1}"), 0, 2.0});
    for (const auto& pt : dominant_regime(table, {0.1, 1.0, 10.0, 100.0})) {
        EXPECT_EQ(pt.subset, AxisSet::of({0}));
    }
}

TEST(DominantRegime, ProductKernelSwitchesRegime) {
    const auto table = tail_table(rademacher_xy().expand(1));
    const auto pts = dominant_regime(table, {0.1, 0.5, 2.0, 10.0});
    EXPECT_EQ(pts.front().subset, AxisSet::full(2));
    EXPECT_EQ(pts.front().partition, Partition::parse("{1,2}"));
    EXPECT_EQ(pts.back().subset, AxisSet{});
    EXPECT_EQ(pts.back().partition.degree(), 0);
}

TEST(DominantRegime, TiesGoToSmallestSubset) {
    auto table = tail_table(rademacher_xy().expand(1));
    // Pin every norm to exactly 1 so that all exponents tie at t = 1.
    for (auto& term : table.terms) {
        term.sup_norm = 1.0;
    }
    const auto pts = dominant_regime(table, {1.0});
    EXPECT_EQ(pts.front().subset, AxisSet{});
}

TEST(DominantRegime, InvariantUnderJointScaling) {
    const auto k = random_canonical_kernel(2, 2, 2, 61);
    const std::vector<double> grid{0.2, 1.0, 3.0, 12.0};
    const auto a = dominant_regime(tail_table(k), grid);
    std::vector<double> grid3;
    for (double t : grid) {
        grid3.push_back(3.0 * t);
    }
    const auto b = dominant_regime(tail_table(k.scaled(3.0)), grid3);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].subset, b[i].subset);
        EXPECT_EQ(a[i].partition, b[i].partition);
        EXPECT_TRUE(near_rel(a[i].exponent, b[i].exponent, 1e-9));
    }
}

TEST(DominantRegime, RateNeverIncreasesWithT) {
    // Larger t favours smaller rates 2 / (deg J + 2 #I^c).
    const auto k = random_canonical_kernel(2, 2, 2, 62);
    const auto table = tail_table(k);
    std::vector<double> grid;
    for (double t = 0.05; t < 200.0; t *= 1.3) {
        grid.push_back(t);
    }
    double prev_rate = std::numeric_limits<double>::infinity();
    for (const auto& pt : dominant_regime(table, grid)) {
        const auto& term = find_term(table, pt.subset, pt.partition);
        const double rate = tail_rate(term);
        EXPECT_LE(rate, prev_rate + 1e-12) << pt.t;
        prev_rate = rate;
    }
}

TEST(DominantRegime, ValidatesGrid) {
    const auto table = tail_table(rademacher_x().expand(2));
    EXPECT_THROW(dominant_regime(table, {1.0, 1.0}), DomainError);
    EXPECT_THROW(dominant_regime(table, {0.0, 1.0}), DomainError);
    EXPECT_THROW(dominant_regime(table, {2.0, 1.0}), DomainError);
}

TEST(Threshold, ExampleAndInversion) {
    // h(x) = x, n = 1: threshold p + p^(1/2).
    const auto table = tail_table(rademacher_x().expand(1));
    EXPECT_NEAR(threshold_value(table, 2.0, 1.0), 2.0 + std::sqrt(2.0), 1e-12);
    const auto rep = tail_threshold(table, 2.0, 1.0);
    EXPECT_NEAR(rep.total, 2.0 + std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(rep.probability, std::exp(-2.0), 1e-15);
    for (double p : {2.5, 7.0, 30.0}) {
        const double t = threshold_value(table, p, 1.0);
        const auto inv = threshold_tail(table, t, 1.0);
        EXPECT_NEAR(inv.exponent, p, 1e-6);
    }
    EXPECT_EQ(threshold_tail(table, 1.0, 1.0).probability, 1.0);
}

TEST(Threshold, TailIsMonotone) {
    const auto table = tail_table(random_canonical_kernel(2, 2, 2, 71));
    double prev = 1.0;
    for (double t = 0.5; t < 5000.0; t *= 1.5) {
        const double pr = threshold_tail(table, t, 1.0).probability;
        EXPECT_LE(pr, prev);
        prev = pr;
    }
}
