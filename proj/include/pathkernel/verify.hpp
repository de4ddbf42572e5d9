#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pathkernel/flow.hpp"
#include "pathkernel/kernel.hpp"
#include "pathkernel/loss.hpp"
#include "pathkernel/model.hpp"

namespace pathkernel::verify {

/// Central differences of eval, one coordinate at a time. Never calls grad_params.
[[nodiscard]] ParamVector fd_gradient(const ModelSpec& spec, std::span<const double> w,
                                      std::span<const double> x, double h);

/// Max over coordinates of |a − b| / max(1, |b|).
[[nodiscard]] double max_relative_error(std::span<const double> a, std::span<const double> b);

/// Closed-form gradient flow dw/dt = −XᵀX w + Xᵀy* for a linear model under
/// half squared error, evaluated at time T via the eigendecomposition of XᵀX.
/// Components in the null space of XᵀX stay at their initial value.
[[nodiscard]] ParamVector linear_flow_oracle(const ModelSpec& spec, std::span<const DataPoint> data,
                                             std::span<const double> w0, double T);

struct PsdResult {
    bool psd = false;
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
};

/// Symmetric eigen-solve; psd iff min eig ≥ −tol · max(1, max eig).
/// Throws Error when the matrix is asymmetric beyond 1e-9.
[[nodiscard]] PsdResult psd_check(const GramMatrix& gram, double tol = 1e-10);

/// `count` held-out queries: half at midpoints between neighbouring training
/// inputs, half beyond the input range by up to one range width.
[[nodiscard]] std::vector<Vector> held_out_queries(std::span<const DataPoint> data, std::size_t count = 8);

/// max over queries of |ŷ − y_net| / max(1, |y_net|).
[[nodiscard]] double max_reconstruction_error(const Trajectory& traj, std::span<const Vector> queries,
                                              KernelOptions options = {});

struct SweepConfig {
    ModelSpec spec;
    LossSpec loss;
    RegularizerSpec reg;
    std::vector<DataPoint> data;
    ParamVector init;
    /// ε·S, held fixed across the sweep.
    double total_time = 1.0;
    /// Mode, batch size and stride are taken from here; epsilon and steps are overridden.
    TrainConfig train;
    std::vector<Vector> queries;
    std::uint64_t seed = 0;
};

struct SweepResult {
    Vector epsilons;  ///< descending, surviving points only
    Vector errors;
    std::vector<std::uint64_t> steps;
    /// Log-log least-squares slope; absent for linear models (exact regime).
    std::optional<double> fitted_slope;
    Vector dropped_epsilons;
    std::vector<std::string> warnings;
};

/// Trains at each ε with ε·S fixed, reconstructs the query set and fits the
/// convergence order. Sweep points train in parallel. Throws
/// InsufficientDataError when fewer than 3 points survive.
[[nodiscard]] SweepResult epsilon_sweep(const SweepConfig& base, std::vector<double> epsilons);

/// errors[k+1] ≤ errors[k] · slack for every consecutive pair.
[[nodiscard]] bool monotone_nonincreasing(std::span<const double> errors, double slack = 1.05);

/// Least-squares slope of log(y) against log(x).
[[nodiscard]] double log_log_slope(std::span<const double> x, std::span<const double> y);

struct SgdCheckConfig {
    ModelSpec spec;
    LossSpec loss;
    RegularizerSpec reg;
    std::vector<DataPoint> data;
    ParamVector init;
    double epsilon = 1e-2;
    std::uint64_t steps = 100;
    std::uint64_t batch_size = 1;
    std::uint64_t minibatch_seed = 0;
    std::vector<Vector> queries;
};

struct SgdMaskReport {
    double minibatch_error = 0.0;
    double batch_error = 0.0;
    /// minibatch_error ≤ 10 · batch_error + 1e-9
    bool same_order = false;
    std::vector<std::size_t> never_sampled;
    /// Every never-sampled example has K^lp exactly 0 and zero attribution.
    bool never_sampled_zero = false;
    /// Set when batch_size == m: reconstruction bit-identical to batch mode.
    std::optional<bool> identical_to_batch;
    bool ok = false;
};

[[nodiscard]] SgdMaskReport sgd_mask_check(const SgdCheckConfig& config);

}  // namespace pathkernel::verify
