#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pathkernel/kernel.hpp"
#include "pathkernel/verify.hpp"
#include "test_util.hpp"

using namespace pathkernel;

namespace {

const LossSpec kSquared{LossKind::HalfSquaredError};

TrainConfig batch(double eps, std::uint64_t steps) {
    TrainConfig cfg;
    cfg.epsilon = eps;
    cfg.steps = steps;
    return cfg;
}

Trajectory sine_run(double eps, std::uint64_t steps, std::uint64_t seed = 1) {
    const ModelSpec spec = ModelSpec::mlp({1, 8, 1}, Activation::Tanh);
    return train(spec, kSquared, {}, fixtures::sine_regression(), init_params(spec, InitScheme::UniformScaled, seed),
                 batch(eps, steps))
        .trajectory;
}

}  // namespace

TEST(TangentKernel, LinearIsInputDotProduct) {
    EXPECT_EQ(tangent_kernel(ModelSpec::linear(2), Vector{5.0, -7.0}, Vector{1.0, 2.0}, Vector{3.0, 4.0}), 11.0);
}

TEST(TangentKernel, MatchesFiniteDifferenceGradients) {
    const ModelSpec spec = ModelSpec::mlp({2, 5, 1}, Activation::Sigmoid);
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        const ParamVector w = fixtures::random_vector(rng, param_count(spec));
        const Vector x = fixtures::random_vector(rng, 2);
        const Vector xp = fixtures::random_vector(rng, 2);
        const ParamVector gx = verify::fd_gradient(spec, w, x, 1e-5);
        const ParamVector gxp = verify::fd_gradient(spec, w, xp, 1e-5);
        const double fd = std::inner_product(gx.begin(), gx.end(), gxp.begin(), 0.0);
        EXPECT_LT(fixtures::rel_err(tangent_kernel(spec, w, x, xp), fd), 1e-6);
        EXPECT_GE(tangent_kernel(spec, w, x, x), 0.0);
    }
}

TEST(TangentKernel, GramExamples) {
    const ModelSpec spec = ModelSpec::linear(2);
    const std::vector<Vector> one{{3.0, 4.0}};
    EXPECT_EQ(tangent_gram(spec, Vector{0.0, 0.0}, one)(0, 0), 25.0);
    const std::vector<Vector> pts{{1.0, 0.0}, {0.0, 2.0}, {1.0, 1.0}};
    const GramMatrix g = tangent_gram(spec, Vector{0.0, 0.0}, pts);
    const double expected[3][3] = {{1, 0, 1}, {0, 4, 2}, {1, 2, 2}};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(g(i, j), expected[i][j]);

    const ModelSpec mlp = ModelSpec::mlp({1, 3, 1}, Activation::Tanh);
    const ParamVector w = init_params(mlp, InitScheme::UniformScaled, 3);
    const std::vector<Vector> dup{{0.4}, {0.4}};
    const GramMatrix gd = tangent_gram(mlp, w, dup);
    EXPECT_EQ(gd(0, 0), gd(0, 1));
    EXPECT_EQ(gd(1, 0), gd(1, 1));
}

TEST(PathKernel, LinearClosedForm) {
    const auto data = fixtures::linear_dataset(6, 2, 4);
    const Trajectory t = train(ModelSpec::linear(2), kSquared, {}, data, Vector(2, 0.0), batch(0.01, 37)).trajectory;
    const Vector x{0.3, -1.2};
    const Vector xp{2.0, 0.5};
    EXPECT_NEAR(path_kernel(t, x, xp), (0.3 * 2.0 - 1.2 * 0.5) * 37 * 0.01, 1e-12);
}

TEST(PathKernel, NoStepsMeansZeroKernel) {
    const Trajectory t = sine_run(0.01, 0);
    EXPECT_EQ(path_kernel(t, Vector{0.1}, Vector{0.2}), 0.0);
    const Reconstruction r = reconstruct(t, Vector{0.3});
    EXPECT_EQ(r.y_hat, r.b);
    EXPECT_EQ(r.y_hat, r.y_net);
    EXPECT_EQ(r.flagged_count(), t.num_points());
}

TEST(PathKernel, SymmetricBitExact) {
    const Trajectory t = sine_run(0.01, 40);
    std::mt19937_64 rng(2);
    for (int k = 0; k < 20; ++k) {
        const Vector x = fixtures::random_vector(rng, 1);
        const Vector xp = fixtures::random_vector(rng, 1);
        EXPECT_EQ(path_kernel(t, x, xp), path_kernel(t, xp, x));
    }
}

TEST(PathKernel, IsSumOfTangentKernelsAlongPath) {
    const Trajectory t = sine_run(0.02, 25);
    const Vector x{0.35};
    const Vector xp{-0.8};
    double expected = 0.0;
    for (std::size_t k = 0; k + 1 < t.checkpoints.size(); ++k) {
        const ParamVector g1 = verify::fd_gradient(t.spec, t.checkpoints[k].w, x, 1e-5);
        const ParamVector g2 = verify::fd_gradient(t.spec, t.checkpoints[k].w, xp, 1e-5);
        expected += 0.02 * std::inner_product(g1.begin(), g1.end(), g2.begin(), 0.0);
    }
    EXPECT_LT(fixtures::rel_err(path_kernel(t, x, xp), expected), 1e-8);
}

TEST(PathKernel, GramIsPositiveSemidefinite) {
    const Trajectory t = sine_run(5e-3, 200, 7);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<Vector> pts;
        for (int p = 0; p < 15; ++p) pts.push_back(fixtures::random_vector(rng, 1));
        pts.push_back(pts[0]);
        const verify::PsdResult psd = verify::psd_check(path_gram(t, pts), 1e-10);
        EXPECT_TRUE(psd.psd) << psd.min_eigenvalue;
        EXPECT_GE(psd.min_eigenvalue, -1e-8 * psd.max_eigenvalue);
    }
}

TEST(LossWeightedPathKernel, ZeroWhenTargetsAlreadyFit) {
    const auto base = fixtures::linear_dataset(5, 2, 6);
    std::vector<DataPoint> data = base;
    const Vector w{0.7, -0.4};
    for (auto& p : data) p.y_star = eval(ModelSpec::linear(2), w, p.x);
    const Trajectory t = train(ModelSpec::linear(2), kSquared, {}, data, w, batch(0.05, 10)).trajectory;
    for (std::size_t i = 0; i < data.size(); ++i) EXPECT_EQ(loss_weighted_path_kernel(t, Vector{1.0, 1.0}, i), 0.0);
}

TEST(LossWeightedPathKernel, MatchesBruteForce) {
    const Trajectory t = sine_run(0.01, 60, 4);
    const Vector x{0.123};
    const std::vector<double> brute = fixtures::brute_force_contributions(t, x);
    for (std::size_t i = 0; i < t.num_points(); ++i)
        EXPECT_NEAR(-loss_weighted_path_kernel(t, x, i), brute[i], 1e-12);
}

TEST(ExampleWeights, ConstantLossDerivativeGivesMinusThatConstant) {
    Trajectory t = sine_run(0.01, 30, 5);
    // pretend every recorded output sits 0.25 above its target
    for (auto& cp : t.checkpoints)
        for (std::size_t i = 0; i < t.num_points(); ++i) cp.outputs[i] = t.data[i].y_star + 0.25;
    const ExampleWeights w = example_weights(t, Vector{0.4});
    for (std::size_t i = 0; i < t.num_points(); ++i) {
        ASSERT_FALSE(w.flags[i]);
        EXPECT_NEAR(w.a[i], -0.25, 1e-12);
    }
}

TEST(ExampleWeights, DeadReluIsFlagged) {
    ModelSpec spec = ModelSpec::mlp({1, 2, 1}, Activation::ReLU);
    spec.bias = {true, false};
    // hidden units: z = 0.1·x − 5 < 0 on the data, so every gradient vanishes
    const ParamVector w{0.1, 0.1, -5.0, -5.0, 1.0, 1.0};
    const std::vector<DataPoint> data{{{0.5}, 1.0, 0}, {{-0.5}, 0.0, 1}};
    const Trajectory t = train(spec, kSquared, {}, data, w, batch(0.1, 5)).trajectory;
    const Reconstruction r = reconstruct(t, Vector{0.2});
    EXPECT_EQ(r.flagged_count(), 2u);
    EXPECT_EQ(r.k_self, 0.0);
    for (const double a : r.a) EXPECT_EQ(a, 0.0);
    EXPECT_EQ(r.y_hat, r.y_net);
}

TEST(Reconstruct, SingleExampleLinearModel) {
    const std::vector<DataPoint> data{{{1.0, 2.0}, 3.0, 0}};
    const Trajectory t = train(ModelSpec::linear(2), kSquared, {}, data, Vector{0.2, -0.1}, batch(0.05, 40)).trajectory;
    const Vector x{-0.5, 0.75};
    const Reconstruction r = reconstruct(t, x);
    EXPECT_LT(fixtures::rel_err(r.a[0] * r.k[0] + r.b, r.y_net), 1e-9);
    EXPECT_LT(fixtures::rel_err(r.y_hat, r.y_net), 1e-9);
    EXPECT_LT(fixtures::rel_err(r.y_hat_from_weights(), r.y_net), 1e-9);
}

TEST(Reconstruct, TrainingOutputTelescopes) {
    const std::vector<DataPoint> data{{{1.0}, 1.0, 0}};
    const Trajectory t = train(ModelSpec::linear(1), kSquared, {}, data, Vector{0.0}, batch(0.1, 100)).trajectory;
    const Reconstruction r = reconstruct(t, Vector{1.0});
    // y0 − y_final = Σ K^lp for a linear model
    EXPECT_NEAR(r.y0 - t.checkpoints.back().w[0], r.klp[0], 1e-12);
    EXPECT_NEAR(r.y_hat, 1.0 - std::pow(0.9, 100), 1e-12);
}

TEST(Reconstruct, LinearModelIsExactEverywhere) {
    const auto data = fixtures::linear_dataset(10, 3, 8);
    ModelSpec spec = ModelSpec::linear(3, true);
    const Trajectory t = train(spec, kSquared, {}, data, Vector{0.1, 0.2, -0.3, 0.05}, batch(0.01, 500)).trajectory;
    for (const auto& q : verify::held_out_queries(data, 8)) {
        const Reconstruction r = reconstruct(t, q);
        EXPECT_LT(fixtures::rel_err(r.y_hat, r.y_net), 1e-9);
    }
}

TEST(Reconstruct, MlpErrorShrinksWithStepSize) {
    const double T = 1.0;
    const Vector q{0.05};
    double previous = 0.0;
    for (const double eps : {8e-3, 4e-3, 2e-3}) {
        const Trajectory t = sine_run(eps, static_cast<std::uint64_t>(std::llround(T / eps)), 3);
        const Reconstruction r = reconstruct(t, q);
        const double err = std::abs(r.y_hat - r.y_net);
        if (previous > 0.0) EXPECT_LT(err, previous);
        previous = err;
    }
}

TEST(Reconstruct, FinalCheckpointIsNotConsulted) {
    Trajectory t = sine_run(0.01, 30);
    const Vector x{0.6};
    const double before = reconstruct(t, x).y_hat;
    for (auto& v : t.checkpoints.back().w) v += 1.0;
    EXPECT_EQ(reconstruct(t, x).y_hat, before);
}

TEST(Reconstruct, RecomputedOutputsMatchRecorded) {
    const auto data = fixtures::sine_regression();
    const ModelSpec spec = ModelSpec::mlp({1, 6, 1}, Activation::Tanh);
    TrainConfig cfg = batch(0.01, 40);
    const ParamVector w0 = init_params(spec, InitScheme::UniformScaled, 2);
    const Trajectory with = train(spec, kSquared, {}, data, w0, cfg).trajectory;
    cfg.record_outputs = false;
    const Trajectory without = train(spec, kSquared, {}, data, w0, cfg).trajectory;
    ASSERT_FALSE(without.has_outputs());
    const Vector x{-0.3};
    EXPECT_EQ(reconstruct(with, x).klp, reconstruct(without, x).klp);
    KernelOptions strict;
    strict.recompute_outputs = false;
    EXPECT_THROW((void)reconstruct(without, x, strict), Error);
}

TEST(Reconstruct, CachedAndUncachedGradientsAgree) {
    const Trajectory t = sine_run(0.01, 40);
    KernelOptions nocache;
    nocache.cache_limit_bytes = 0;
    const PathKernelEngine cached(t);
    const PathKernelEngine uncached(t, nocache);
    ASSERT_TRUE(cached.gradients_cached());
    ASSERT_FALSE(uncached.gradients_cached());
    const Reconstruction a = cached.reconstruct(Vector{0.2});
    const Reconstruction b = uncached.reconstruct(Vector{0.2});
    EXPECT_EQ(a.y_hat, b.y_hat);
    EXPECT_EQ(a.k, b.k);
}

TEST(Reconstruct, CoarseCheckpointsStillApproximate) {
    const ModelSpec spec = ModelSpec::mlp({1, 8, 1}, Activation::Tanh);
    TrainConfig cfg = batch(2e-3, 1000);
    cfg.checkpoint_stride = 10;
    const Trajectory coarse = train(spec, kSquared, {}, fixtures::sine_regression(),
                                    init_params(spec, InitScheme::UniformScaled, 1), cfg)
                                  .trajectory;
    const Trajectory fine = sine_run(2e-3, 1000, 1);
    const Vector x{0.5};
    const Reconstruction rc = reconstruct(coarse, x);
    const Reconstruction rf = reconstruct(fine, x);
    EXPECT_EQ(rc.y_net, rf.y_net);
    EXPECT_LT(std::abs(rf.y_hat - rf.y_net), std::abs(rc.y_hat - rc.y_net));
    const double estimate = quadrature_error_estimate(coarse, x);
    EXPECT_TRUE(std::isfinite(estimate));
    EXPECT_GT(estimate, 0.0);
}

TEST(Regularization, OffsetZeroWithoutRegularizer) {
    EXPECT_EQ(regularization_offset(sine_run(0.01, 10), Vector{0.1}), 0.0);
}

TEST(Regularization, LinearOffsetClosedForm) {
    const auto data = fixtures::linear_dataset(6, 2, 9);
    const RegularizerSpec reg{RegularizerKind::L2, 0.05};
    const Trajectory t = train(ModelSpec::linear(2), kSquared, reg, data, Vector{0.5, -0.5}, batch(0.01, 80)).trajectory;
    const Vector x{1.5, -2.0};
    double expected = 0.0;
    for (std::size_t k = 0; k + 1 < t.checkpoints.size(); ++k) {
        const auto& w = t.checkpoints[k].w;
        expected -= 0.01 * 2 * 0.05 * (w[0] * x[0] + w[1] * x[1]);
    }
    EXPECT_NEAR(regularization_offset(t, x), expected, 1e-13);
    const Reconstruction r = reconstruct(t, x);
    EXPECT_LT(fixtures::rel_err(r.y_hat, r.y_net), 1e-9);
    EXPECT_GT(std::abs(r.y0 - std::accumulate(r.klp.begin(), r.klp.end(), 0.0) - r.y_net), 1e-4);
}

TEST(Attribute, SingleExampleCarriesEverything) {
    const std::vector<DataPoint> data{{{1.0, 2.0}, 3.0, 17}};
    const Trajectory t = train(ModelSpec::linear(2), kSquared, {}, data, Vector{0.0, 0.0}, batch(0.05, 40)).trajectory;
    const AttributionReport rep = attribute(t, Vector{0.5, 0.5}, 1);
    ASSERT_EQ(rep.ranked.size(), 1u);
    EXPECT_EQ(rep.ranked[0].id, 17);
    EXPECT_NEAR(rep.ranked[0].contribution, rep.y_hat - rep.b, 1e-12);
}

TEST(Attribute, DuplicateExamplesShareEqually) {
    const std::vector<DataPoint> data{{{1.0, -1.0}, 2.0, 0}, {{1.0, -1.0}, 2.0, 1}, {{0.0, 1.0}, -1.0, 2}};
    const Trajectory t = train(ModelSpec::linear(2), kSquared, {}, data, Vector{0.0, 0.0}, batch(0.05, 30)).trajectory;
    const AttributionReport rep = attribute(t, Vector{0.3, 0.9}, 3);
    double c0 = 0.0, c1 = 0.0;
    for (const auto& a : rep.ranked) {
        if (a.id == 0) c0 = a.contribution;
        if (a.id == 1) c1 = a.contribution;
    }
    EXPECT_EQ(c0, c1);
}

TEST(Attribute, RankingMatchesBruteForce) {
    const auto data = fixtures::linear_dataset(10, 2, 12);
    ModelSpec spec = ModelSpec::mlp({2, 6, 1}, Activation::Tanh);
    const Trajectory t = train(spec, kSquared, {}, data, init_params(spec, InitScheme::UniformScaled, 5), batch(0.01, 80)).trajectory;
    const Vector x{0.4, -0.2};
    const std::vector<double> brute = fixtures::brute_force_contributions(t, x);
    std::vector<std::size_t> order(brute.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(brute[a]) > std::abs(brute[b]); });
    const AttributionReport rep = attribute(t, x, 10);
    for (std::size_t r = 0; r < 10; ++r) {
        EXPECT_EQ(rep.ranked[r].position, order[r]);
        EXPECT_NEAR(rep.ranked[r].contribution, brute[order[r]], 1e-12);
    }
    EXPECT_NEAR(rep.total_contribution, std::accumulate(brute.begin(), brute.end(), 0.0), 1e-12);
    EXPECT_NEAR(rep.total_contribution, rep.y_hat - rep.b, 1e-12);
}

TEST(Attribute, TopKValidated) {
    const Trajectory t = sine_run(0.01, 5);
    EXPECT_THROW((void)attribute(t, Vector{0.0}, 0), Error);
    EXPECT_THROW((void)attribute(t, Vector{0.0}, 11), Error);
    EXPECT_EQ(attribute(t, Vector{0.0}, 10).ranked.size(), 10u);
}

TEST(Thin, KeepsEveryKthAndLast) {
    const Trajectory t = sine_run(0.01, 9);
    const Trajectory thin = thin_trajectory(t, 4);
    std::vector<std::uint64_t> steps;
    for (const auto& cp : thin.checkpoints) steps.push_back(cp.step);
    EXPECT_EQ(steps, (std::vector<std::uint64_t>{0, 4, 8, 9}));
}
