#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pathkernel/error.hpp"
#include "pathkernel/loss.hpp"
#include "pathkernel/model.hpp"

namespace pathkernel {

enum class BatchMode : std::uint8_t { Batch = 0, Minibatch = 1 };

struct TrainConfig {
    double epsilon = 1e-3;
    std::uint64_t steps = 0;
    BatchMode mode = BatchMode::Batch;
    std::uint64_t batch_size = 0;  ///< minibatch only
    std::uint64_t minibatch_seed = 0;
    std::uint64_t checkpoint_stride = 1;
    /// Store y_i(w_s) per checkpoint; kernels recompute them when absent.
    bool record_outputs = true;

    void validate(std::size_t num_points) const;
};

/// Loss must stay below this multiple of the initial loss.
inline constexpr double kDivergenceFactor = 1e6;

struct Checkpoint {
    std::uint64_t step = 0;
    ParamVector w;
    /// Learning rate of the update leaving this checkpoint.
    double epsilon = 0.0;
    /// I_i(t): examples taking part in the update leaving this checkpoint.
    std::vector<bool> mask;
    /// y_i(w_s), empty when not recorded.
    Vector outputs;
};

/// Discretized gradient-descent path plus everything needed to rebuild it.
struct Trajectory {
    ModelSpec spec;
    LossSpec loss;
    RegularizerSpec reg;
    std::vector<DataPoint> data;
    TrainConfig train;
    std::uint64_t seed = 0;
    /// Hash of the experiment configuration that produced the run (0 if unknown).
    std::uint64_t config_hash = 0;
    std::vector<Checkpoint> checkpoints;

    [[nodiscard]] std::size_t num_points() const { return data.size(); }
    [[nodiscard]] std::size_t num_params() const { return param_count(spec); }
    /// Number of gradient steps covered (step index of the last checkpoint).
    [[nodiscard]] std::uint64_t steps() const {
        return checkpoints.empty() ? 0 : checkpoints.back().step;
    }
    [[nodiscard]] bool has_outputs() const;
    /// Quadrature weight of checkpoint k: ε_k times the number of steps until
    /// the next stored checkpoint. Zero for the final checkpoint.
    [[nodiscard]] double quadrature_weight(std::size_t k) const;
    [[nodiscard]] std::uint64_t stride() const { return train.checkpoint_stride; }
};

struct TrainLog {
    /// Objective Σ_i L_i + R(w) before each step 0..S.
    std::vector<double> loss_curve;
    /// Cross-entropy outputs clamped to the probability floor.
    std::uint64_t floor_hits = 0;
    bool diverged = false;
    std::uint64_t diverged_at = 0;
};

struct TrainResult {
    Trajectory trajectory;
    TrainLog log;
};

/// Training diverged (non-finite gradient, or loss above kDivergenceFactor ×
/// initial). Carries the run truncated at the last stable checkpoint.
class DivergenceError : public Error {
  public:
    DivergenceError(std::string what, std::uint64_t step, double grad_norm, TrainResult partial);

    [[nodiscard]] std::uint64_t step() const noexcept { return step_; }
    [[nodiscard]] double grad_norm() const noexcept { return grad_norm_; }
    [[nodiscard]] const TrainResult& partial() const noexcept { return partial_; }

  private:
    std::uint64_t step_;
    double grad_norm_;
    TrainResult partial_;
};

/// One update w − ε·(Σ_i mask_i L′(y_i*, y_i) ∇_w f_w(x_i) + ∇_w R(w)).
/// Throws DivergenceError when the gradient is not finite.
[[nodiscard]] ParamVector gd_step(const ModelSpec& spec, const LossSpec& loss,
                                  const RegularizerSpec& reg, std::span<const double> w,
                                  std::span<const DataPoint> data, const std::vector<bool>& mask,
                                  double epsilon, std::uint64_t step_index = 0);

[[nodiscard]] TrainResult train(const ModelSpec& spec, const LossSpec& loss,
                                const RegularizerSpec& reg, std::vector<DataPoint> data,
                                ParamVector init, const TrainConfig& cfg, std::uint64_t seed = 0);

/// Minibatch mask stream for a run; step s of `draw` gives mask_s.
class MinibatchSampler {
  public:
    MinibatchSampler(std::size_t num_points, std::uint64_t batch_size, std::uint64_t seed);
    std::vector<bool> draw();

  private:
    std::uint64_t batch_size_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> order_;
};

struct ReplayReport {
    bool ok = false;
    std::optional<std::uint64_t> first_mismatch_step;
    std::string message;
};

/// Re-runs every stored transition with gd_step and compares bit-exactly;
/// recorded outputs are re-evaluated too. Requires a stride-1 trajectory.
[[nodiscard]] ReplayReport replay_check(const Trajectory& traj);

}  // namespace pathkernel
