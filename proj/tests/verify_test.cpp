#include <gtest/gtest.h>

#include <cmath>

#include "pathkernel/error.hpp"
#include "pathkernel/verify.hpp"
#include "test_util.hpp"

using namespace pathkernel;
using namespace pathkernel::verify;

namespace {

const LossSpec kSquared{LossKind::HalfSquaredError};

GramMatrix matrix(std::size_t n, std::vector<double> values) {
    GramMatrix g;
    g.size = n;
    g.points.resize(n);
    g.values = std::move(values);
    return g;
}

SweepConfig sine_sweep(std::uint64_t seed) {
    SweepConfig cfg;
    cfg.spec = ModelSpec::mlp({1, 8, 1}, Activation::Tanh);
    cfg.loss = kSquared;
    cfg.data = fixtures::sine_regression();
    cfg.init = init_params(cfg.spec, InitScheme::UniformScaled, seed);
    cfg.total_time = 2.0;
    cfg.queries = held_out_queries(cfg.data, 8);
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST(FiniteDifference, ExactForLinearModel) {
    const ParamVector g = fd_gradient(ModelSpec::linear(3), Vector{1.0, 2.0, 3.0}, Vector{0.5, -4.0, 2.0}, 1e-5);
    EXPECT_LT(max_relative_error(g, Vector{0.5, -4.0, 2.0}), 1e-10);
}

TEST(FiniteDifference, RelativeErrorDefinition) {
    EXPECT_EQ(max_relative_error(Vector{1.0, 10.5}, Vector{0.5, 10.0}), 0.5);
    EXPECT_EQ(max_relative_error(Vector{0.0, 110.0}, Vector{0.0, 100.0}), 0.1);
}

TEST(PsdCheck, Examples) {
    EXPECT_TRUE(psd_check(matrix(1, {2.5})).psd);
    EXPECT_FALSE(psd_check(matrix(1, {-1.0})).psd);
    const PsdResult id = psd_check(matrix(3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
    EXPECT_TRUE(id.psd);
    EXPECT_NEAR(id.min_eigenvalue, 1.0, 1e-15);
    // eigenvalues 3 and −1
    const PsdResult indefinite = psd_check(matrix(2, {1, 2, 2, 1}));
    EXPECT_FALSE(indefinite.psd);
    EXPECT_NEAR(indefinite.min_eigenvalue, -1.0, 1e-12);
    EXPECT_NEAR(indefinite.max_eigenvalue, 3.0, 1e-12);
    EXPECT_THROW((void)psd_check(matrix(2, {1, 0.5, 0.4, 1})), Error);
}

TEST(LinearFlowOracle, ZeroTimeIsInitialPoint) {
    const auto data = fixtures::linear_dataset(5, 3, 1);
    const Vector w0{0.1, -0.2, 0.3};
    EXPECT_LT(max_relative_error(linear_flow_oracle(ModelSpec::linear(3), data, w0, 0.0), w0), 1e-14);
}

TEST(LinearFlowOracle, LongTimeSolvesNormalEquations) {
    // two points in 2D: the least-squares solution interpolates, solved by Cramer's rule
    const std::vector<DataPoint> data{{{2.0, 1.0}, 3.0, 0}, {{-1.0, 1.0}, 0.0, 1}};
    const ParamVector w = linear_flow_oracle(ModelSpec::linear(2), data, Vector{0.0, 0.0}, 200.0);
    const double det = 2.0 * 1.0 - 1.0 * -1.0;
    EXPECT_NEAR(w[0], (3.0 * 1.0 - 1.0 * 0.0) / det, 1e-10);
    EXPECT_NEAR(w[1], (2.0 * 0.0 - 3.0 * -1.0) / det, 1e-10);
}

TEST(LinearFlowOracle, NullSpaceComponentFrozen) {
    const std::vector<DataPoint> data{{{1.0, 0.0}, 2.0, 0}};
    const ParamVector w = linear_flow_oracle(ModelSpec::linear(2), data, Vector{0.0, 0.7}, 50.0);
    EXPECT_NEAR(w[0], 2.0, 1e-12);
    EXPECT_NEAR(w[1], 0.7, 1e-15);
}

TEST(LinearFlowOracle, MatchesSmallStepTraining) {
    const auto data = fixtures::linear_dataset(8, 2, 3);
    TrainConfig cfg;
    cfg.epsilon = 1e-5;
    cfg.steps = 100000;
    cfg.record_outputs = false;
    cfg.checkpoint_stride = 100000;
    const ParamVector w = train(ModelSpec::linear(2), kSquared, {}, data, Vector(2, 0.0), cfg).trajectory.checkpoints.back().w;
    EXPECT_LT(max_relative_error(w, linear_flow_oracle(ModelSpec::linear(2), data, Vector(2, 0.0), 1.0)), 1e-4);
}

TEST(HeldOut, QueriesAvoidTrainingInputs) {
    const auto data = fixtures::sine_regression();
    const auto q = held_out_queries(data, 8);
    ASSERT_EQ(q.size(), 8u);
    int outside = 0;
    for (const auto& v : q) {
        for (const auto& p : data) EXPECT_NE(v[0], p.x[0]);
        outside += (v[0] < -1.0 || v[0] > 1.0) ? 1 : 0;
    }
    EXPECT_EQ(outside, 4);
}

TEST(Sweep, SlopeFitAndMonotonicity) {
    EXPECT_TRUE(monotone_nonincreasing(Vector{4.0, 2.0, 2.05, 1.0}));
    EXPECT_FALSE(monotone_nonincreasing(Vector{4.0, 2.0, 2.2}));
    EXPECT_NEAR(log_log_slope(Vector{1.0, 2.0, 4.0}, Vector{3.0, 6.0, 12.0}), 1.0, 1e-12);
    EXPECT_NEAR(log_log_slope(Vector{1.0, 2.0, 4.0}, Vector{1.0, 4.0, 16.0}), 2.0, 1e-12);
}

TEST(Sweep, MlpErrorIsFirstOrder) {
    const SweepResult r = epsilon_sweep(sine_sweep(1), {4e-3, 2e-3, 1e-3, 5e-4});
    ASSERT_EQ(r.errors.size(), 4u);
    EXPECT_TRUE(monotone_nonincreasing(r.errors));
    ASSERT_TRUE(r.fitted_slope.has_value());
    EXPECT_GE(*r.fitted_slope, 0.7);
    EXPECT_LE(*r.fitted_slope, 1.3);
    EXPECT_EQ(r.steps, (std::vector<std::uint64_t>{500, 1000, 2000, 4000}));
}

TEST(Sweep, InputOrderDoesNotMatter) {
    const SweepResult a = epsilon_sweep(sine_sweep(2), {1e-2, 5e-3, 2.5e-3});
    const SweepResult b = epsilon_sweep(sine_sweep(2), {2.5e-3, 1e-2, 5e-3});
    EXPECT_EQ(a.epsilons, b.epsilons);
    EXPECT_EQ(a.errors, b.errors);
}

TEST(Sweep, LinearModelHasNoSlope) {
    SweepConfig cfg;
    cfg.spec = ModelSpec::linear(2);
    cfg.loss = kSquared;
    cfg.data = fixtures::linear_dataset(6, 2, 4);
    cfg.init = Vector(2, 0.0);
    cfg.queries = held_out_queries(cfg.data, 8);
    const SweepResult r = epsilon_sweep(cfg, {1e-2, 5e-3, 2.5e-3});
    EXPECT_FALSE(r.fitted_slope.has_value());
    for (const double e : r.errors) EXPECT_LT(e, 1e-9);
}

TEST(Sweep, DivergentPointsDroppedAndTooFewRejected) {
    SweepConfig cfg = sine_sweep(3);
    cfg.total_time = 50.0;
    const SweepResult r = epsilon_sweep(cfg, {5.0, 1e-2, 5e-3, 2.5e-3});
    EXPECT_EQ(r.dropped_epsilons, (Vector{5.0}));
    EXPECT_EQ(r.errors.size(), 3u);
    EXPECT_FALSE(r.warnings.empty());
    EXPECT_THROW((void)epsilon_sweep(cfg, {5.0, 1e-2, 5e-3}), InsufficientDataError);
    EXPECT_THROW((void)epsilon_sweep(sine_sweep(3), {1e-2, 5e-3}), InsufficientDataError);
    EXPECT_THROW((void)epsilon_sweep(sine_sweep(3), {1e-2, 1e-2, 5e-3}), ConfigError);
}

TEST(SgdMask, SizeOneMinibatchReconstructs) {
    SgdCheckConfig cfg;
    cfg.spec = ModelSpec::linear(3);
    cfg.loss = kSquared;
    cfg.data = fixtures::linear_dataset(10, 3, 5);
    cfg.init = Vector(3, 0.0);
    cfg.epsilon = 1e-2;
    cfg.steps = 6;
    cfg.batch_size = 1;
    cfg.minibatch_seed = 11;
    cfg.queries = held_out_queries(cfg.data, 8);
    const SgdMaskReport r = sgd_mask_check(cfg);
    EXPECT_LT(r.minibatch_error, 1e-9);
    EXPECT_FALSE(r.never_sampled.empty());
    EXPECT_TRUE(r.never_sampled_zero);
    EXPECT_FALSE(r.identical_to_batch.has_value());
    EXPECT_TRUE(r.ok);
}

TEST(SgdMask, FullBatchIdentical) {
    SgdCheckConfig cfg;
    cfg.spec = ModelSpec::mlp({1, 8, 1}, Activation::Tanh);
    cfg.loss = kSquared;
    cfg.data = fixtures::sine_regression();
    cfg.init = init_params(cfg.spec, InitScheme::UniformScaled, 6);
    cfg.epsilon = 5e-3;
    cfg.steps = 200;
    cfg.batch_size = 10;
    cfg.queries = held_out_queries(cfg.data, 8);
    const SgdMaskReport r = sgd_mask_check(cfg);
    ASSERT_TRUE(r.identical_to_batch.has_value());
    EXPECT_TRUE(*r.identical_to_batch);
    EXPECT_EQ(r.minibatch_error, r.batch_error);
    EXPECT_TRUE(r.never_sampled.empty());
    EXPECT_TRUE(r.ok);
}

TEST(ReconstructionError, MaxOverQueries) {
    const auto data = fixtures::linear_dataset(5, 2, 7);
    TrainConfig cfg;
    cfg.epsilon = 1e-2;
    cfg.steps = 50;
    const Trajectory t = train(ModelSpec::linear(2), kSquared, {}, data, Vector(2, 0.0), cfg).trajectory;
    EXPECT_LT(max_reconstruction_error(t, held_out_queries(data, 8)), 1e-9);
}
