#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ustat;
using ustat::testing::near_rel;

namespace {

StepKernel unit_step() { return {{{0.0, 1.0}}, MultiIndexArray({1}, {1.0})}; }

std::vector<double> uniform_grid(std::size_t cells, double length) {
    std::vector<double> g;
    for (std::size_t k = 0; k <= cells; ++k) {
        g.push_back(length * static_cast<double>(k) / static_cast<double>(cells));
    }
    return g;
}

StepKernel random_step(std::size_t c1, std::size_t c2, std::uint64_t seed) {
    return {{uniform_grid(c1, 2.0), uniform_grid(c2, 1.5)}, ustat::testing::random_array({c1, c2}, seed)};
}

/// Splits every cell in two, copying its coefficient.
StepKernel refine(const StepKernel& h) {
    std::vector<std::vector<double>> grids;
    std::vector<std::size_t> shape;
    for (const auto& g : h.grids()) {
        std::vector<double> r{g.front()};
        for (std::size_t k = 0; k + 1 < g.size(); ++k) {
            r.push_back(0.5 * (g[k] + g[k + 1]));
            r.push_back(g[k + 1]);
        }
        shape.push_back(r.size() - 1);
        grids.push_back(std::move(r));
    }
    std::vector<double> v(product(shape));
    MixedRadix odo(shape);
    std::size_t q = 0;
    do {
        std::vector<std::size_t> src;
        for (std::size_t j = 0; j < shape.size(); ++j) {
            src.push_back(odo[j] / 2);
        }
        v[q++] = h.coefficients().at(src);
    } while (odo.next());
    return {std::move(grids), MultiIndexArray(shape, std::move(v))};
}

} // namespace

TEST(StepKernel, Validates) {
    EXPECT_THROW(StepKernel({{0.0, 1.0}}, MultiIndexArray({2}, {1.0, 2.0})), ShapeError);
    EXPECT_THROW(StepKernel({{0.5, 1.0}}, MultiIndexArray({1}, {1.0})), DomainError);
    EXPECT_THROW(StepKernel({{0.0, 1.0, 1.0}}, MultiIndexArray({2}, {1.0, 2.0})), DomainError);
    EXPECT_THROW(StepKernel({{0.0}}, MultiIndexArray({0}, {})), ShapeError);
}

TEST(ProcessSpec, Validates) {
    const auto h = unit_step();
    auto spec = ProcessSpec::homogeneous_poisson(h);
    EXPECT_NO_THROW(spec.validate(h));
    spec.variance_increments[0][0] = 2.0;
    EXPECT_THROW(spec.validate(h), DomainError);
    spec.kind = ProcessKind::independent_increments;
    EXPECT_NO_THROW(spec.validate(h));
    spec.lambda_increments[0][0] = -1.0;
    EXPECT_THROW(spec.validate(h), DomainError);
    ProcessSpec missing;
    EXPECT_THROW(missing.validate(h), ShapeError);
}

TEST(StepKernelNorm, UnitExample) {
    const auto h = unit_step();
    const auto spec = ProcessSpec::homogeneous_poisson(h);
    const auto f = stepkernel_norm(h, spec, AxisSet::of({0}), Partition::parse("{1}"));
    EXPECT_NEAR(f.supremum, 1.0, 1e-15);
    const auto g = stepkernel_norm(h, spec, AxisSet{}, Partition{});
    EXPECT_NEAR(g.supremum, 1.0, 1e-15);
}

TEST(StepKernelNorm, IdentitySpectralNorm) {
    const StepKernel h({{0.0, 1.0, 2.0}, {0.0, 1.0, 2.0}}, MultiIndexArray({2, 2}, {1.0, 0.0, 0.0, 1.0}));
    const auto spec = ProcessSpec::homogeneous_poisson(h);
    const auto full = AxisSet::full(2);
    EXPECT_NEAR(stepkernel_norm(h, spec, full, Partition::parse("{1}|{2}")).supremum, 1.0, 1e-12);
    EXPECT_NEAR(stepkernel_norm(h, spec, full, Partition::parse("{1,2}")).supremum, std::sqrt(2.0), 1e-12);
    const auto f = stepkernel_norm(h, spec, AxisSet::of({1}), Partition::parse("{2}"));
    EXPECT_EQ(f.values.size(), 2u);
    EXPECT_NEAR(f.supremum, 1.0, 1e-12);
}

TEST(StepKernelNorm, ZeroVarianceCellsDoNotCount) {
    const StepKernel h({{0.0, 1.0, 2.0}}, MultiIndexArray({2}, {5.0, 1.0}));
    ProcessSpec spec;
    spec.lambda_increments = {{0.0, 1.0}};
    spec.variance_increments = {{0.0, 1.0}};
    const auto f = stepkernel_norm(h, spec, AxisSet{}, Partition{});
    EXPECT_EQ(f.values[0], 5.0);
    EXPECT_EQ(f.supremum, 1.0);
}

TEST(StepKernelNorm, RefinementInvariance) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto h = random_step(2, 3, 50 + seed);
        const auto r = refine(h);
        const auto a = step_tail_table(h, ProcessSpec::homogeneous_poisson(h, 1.5));
        const auto b = step_tail_table(r, ProcessSpec::homogeneous_poisson(r, 1.5));
        ASSERT_EQ(a.terms.size(), b.terms.size());
        for (std::size_t i = 0; i < a.terms.size(); ++i) {
            EXPECT_TRUE(near_rel(a.terms[i].sup_norm, b.terms[i].sup_norm, 1e-10))
                << a.terms[i].subset.to_string() << " " << a.terms[i].partition.to_string();
        }
    }
}

TEST(StepKernelNorm, CoarserPartitionIsLarger) {
    const auto h = random_step(3, 3, 60);
    const auto spec = ProcessSpec::homogeneous_poisson(h);
    const auto full = AxisSet::full(2);
    const auto fine = stepkernel_norm(h, spec, full, Partition::parse("{1}|{2}"));
    const auto coarse = stepkernel_norm(h, spec, full, Partition::parse("{1,2}"));
    EXPECT_LE(fine.supremum, coarse.supremum * (1.0 + 1e-12));
}

TEST(StepKernelNorm, RejectsMismatchedPartition) {
    const auto h = random_step(2, 2, 61);
    const auto spec = ProcessSpec::homogeneous_poisson(h);
    EXPECT_THROW(stepkernel_norm(h, spec, AxisSet::of({0}), Partition::parse("{1,2}")), InvalidPartition);
}

TEST(Threshold, UnitExample) {
    const auto rep = theorem8_bound(unit_step(), ProcessSpec::homogeneous_poisson(unit_step()), 2.0, 1.0);
    EXPECT_NEAR(rep.total, 2.0 + std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(rep.probability, std::exp(-2.0), 1e-15);
    EXPECT_EQ(rep.theorem, "8");
}

TEST(Threshold, Homogeneous) {
    const auto h = random_step(2, 2, 62);
    const auto spec = ProcessSpec::homogeneous_poisson(h);
    const double base = theorem8_bound(h, spec, 3.0, 1.0).total;
    EXPECT_TRUE(near_rel(theorem8_bound(h.scaled(-4.0), spec, 3.0, 1.0).total, 4.0 * base, 1e-9));
    EXPECT_TRUE(near_rel(theorem8_bound(h, spec, 3.0, 2.5).total, 2.5 * base, 1e-12));
}

TEST(Threshold, DoublingHorizonScalesInnerTerm) {
    const StepKernel h1({{0.0, 1.0}}, MultiIndexArray({1}, {1.0}));
    const StepKernel h2({{0.0, 2.0}}, MultiIndexArray({1}, {1.0}));
    const auto a = step_tail_table(h1, ProcessSpec::homogeneous_poisson(h1));
    const auto b = step_tail_table(h2, ProcessSpec::homogeneous_poisson(h2));
    for (std::size_t i = 0; i < a.terms.size(); ++i) {
        const double factor = a.terms[i].subset.size() == 1 ? std::sqrt(2.0) : 1.0;
        EXPECT_NEAR(b.terms[i].sup_norm, factor * a.terms[i].sup_norm, 1e-12);
    }
}

TEST(Threshold, TailInversion) {
    const auto h = random_step(2, 2, 63);
    const auto table = step_tail_table(h, ProcessSpec::homogeneous_poisson(h));
    const double t = theorem8_bound(table, 6.0, 1.0).total;
    EXPECT_NEAR(theorem8_tail(table, t, 1.0).exponent, 6.0, 1e-6);
}

TEST(MultipleIntegral, UnitVariance) {
    const auto h = unit_step();
    const auto run = sample_multiple_integral(h, ProcessSpec::homogeneous_poisson(h), 3, 200000);
    EXPECT_NEAR(run.mean, 0.0, 4.0 * run.mean_se);
    EXPECT_NEAR(run.second_moment, 1.0, 4.0 * run.second_moment_se);
}

TEST(MultipleIntegral, SecondOrderIsometry) {
    const auto h = random_step(2, 3, 64);
    const auto spec = ProcessSpec::homogeneous_poisson(h, 0.8);
    double want = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t k = 0; k < 3; ++k) {
            const double a = h.coefficients().at(std::vector<std::size_t>{i, k});
            want += a * a * spec.variance_increments[0][i] * spec.variance_increments[1][k];
        }
    }
    const auto run = sample_multiple_integral(h, spec, 4, 200000);
    EXPECT_NEAR(run.second_moment, want, 4.0 * run.second_moment_se);
}

TEST(MultipleIntegral, ZeroKernel) {
    const StepKernel h({{0.0, 1.0, 2.0}}, MultiIndexArray({2}, {0.0, 0.0}));
    const auto run = sample_multiple_integral(h, ProcessSpec::homogeneous_poisson(h), 5, 1000);
    EXPECT_EQ(run.max_abs, 0.0);
    const auto v = verify_theorem8(h, ProcessSpec::homogeneous_poisson(h), 1.0, 5, 1000, {2.0});
    EXPECT_EQ(v.rows[0].count, 0u);
}

TEST(MultipleIntegral, RejectsNonPoissonProcess) {
    const auto h = unit_step();
    auto spec = ProcessSpec::homogeneous_poisson(h);
    spec.kind = ProcessKind::independent_increments;
    EXPECT_THROW(sample_multiple_integral(h, spec, 1, 10), UnsupportedMethod);
}

TEST(VerifyThreshold, FlagsUnresolvableLevels) {
    const auto h = unit_step();
    const auto v = verify_theorem8(h, ProcessSpec::homogeneous_poisson(h), 1.0, 7, 1000, {2.0, 10.0});
    ASSERT_EQ(v.rows.size(), 2u);
    EXPECT_NE(v.rows[0].status, CheckStatus::unresolvable);
    EXPECT_EQ(v.rows[1].status, CheckStatus::unresolvable);
    EXPECT_EQ(v.unresolvable, 1u);
}

TEST(VerifyThreshold, DeterministicAcrossThreads) {
    const auto h = random_step(2, 2, 65);
    const auto spec = ProcessSpec::homogeneous_poisson(h);
    NormConfig one;
    one.threads = 1;
    NormConfig eight;
    eight.threads = 8;
    const auto a = verify_theorem8(h, spec, 0.5, 9, 40000, {2.0, 3.0}, one);
    const auto b = verify_theorem8(h, spec, 0.5, 9, 40000, {2.0, 3.0}, eight);
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
        EXPECT_EQ(a.rows[k].count, b.rows[k].count);
        EXPECT_EQ(a.rows[k].threshold, b.rows[k].threshold);
    }
}

TEST(FitThreshold, RequiresKeptSamples) {
    const auto h = unit_step();
    const auto spec = ProcessSpec::homogeneous_poisson(h);
    const auto table = step_tail_table(h, spec);
    const auto run = sample_multiple_integral(h, spec, 1, 1000);
    EXPECT_THROW(theorem8_fit_instances(table, run, {2.0}), DomainError);
}

TEST(FitThreshold, FittedConstantHoldsOnCalibrationSample) {
    const auto h = random_step(2, 2, 66);
    const auto spec = ProcessSpec::homogeneous_poisson(h);
    const auto table = step_tail_table(h, spec);
    SampleRequest req;
    req.keep_samples = true;
    const auto run = sample_multiple_integral(h, spec, 12, 20000, req);
    const std::vector<double> grid{2.0, 3.0, 4.0};
    const auto fit = fit_constant(theorem8_fit_instances(table, run, grid));
    EXPECT_GT(fit.constant, 0.0);
    const auto v = verify_theorem8(table, h, spec, fit.constant, 12, 20000, grid);
    EXPECT_TRUE(v.pass);
}
