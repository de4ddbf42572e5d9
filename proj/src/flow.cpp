#include "pathkernel/flow.hpp"

#include <cmath>
#include <numeric>

#include "pathkernel/rng.hpp"

namespace pathkernel {

void TrainConfig::validate(std::size_t num_points) const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("train.epsilon must be finite and > 0");
    if (checkpoint_stride == 0) throw ConfigError("train.checkpoint_stride must be positive");
    if (mode == BatchMode::Minibatch && (batch_size == 0 || batch_size > num_points))
        throw ConfigError("train.batch_size must be in [1, " + std::to_string(num_points) + "]");
}

bool Trajectory::has_outputs() const {
    for (const auto& c : checkpoints)
        if (c.outputs.size() != data.size()) return false;
    return !checkpoints.empty();
}

double Trajectory::quadrature_weight(std::size_t k) const {
    if (k + 1 >= checkpoints.size()) return 0.0;
    const auto span = static_cast<double>(checkpoints[k + 1].step - checkpoints[k].step);
    return span * checkpoints[k].epsilon;
}

DivergenceError::DivergenceError(std::string what, std::uint64_t step, double grad_norm,
                                 TrainResult partial)
    : Error(std::move(what)), step_(step), grad_norm_(grad_norm), partial_(std::move(partial)) {}

MinibatchSampler::MinibatchSampler(std::size_t num_points, std::uint64_t batch_size, std::uint64_t seed)
    : batch_size_(batch_size), rng_(seed), order_(num_points) {}

std::vector<bool> MinibatchSampler::draw() {
    // partial Fisher-Yates over a fresh identity permutation
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::vector<bool> mask(order_.size(), false);
    for (std::size_t k = 0; k < batch_size_; ++k) {
        const std::size_t j = k + detail::uniform_below(rng_, order_.size() - k);
        std::swap(order_[k], order_[j]);
        mask[order_[k]] = true;
    }
    return mask;
}

namespace {

struct StepEval {
    ParamVector gradient;  ///< ∇_w of the masked objective
    Vector outputs;
    double objective = 0.0;
    std::uint64_t floor_hits = 0;
};

/// Outputs for all points and the masked objective gradient at w. Points are
/// reduced in index order so results are bit-reproducible.
StepEval evaluate_step(const ModelSpec& spec, const LossSpec& loss, const RegularizerSpec& reg,
                       std::span<const double> w, std::span<const DataPoint> data,
                       const std::vector<bool>& mask) {
    StepEval ev;
    ev.gradient.assign(w.size(), 0.0);
    ev.outputs.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const DataPoint& p = data[i];
        if (mask[i]) {
            EvalGrad eg = eval_and_grad(spec, w, p.x);
            ev.outputs[i] = eg.value;
            const double dl = loss_derivative(loss, p.y_star, eg.value);
            for (std::size_t j = 0; j < w.size(); ++j) ev.gradient[j] += dl * eg.grad[j];
        } else {
            ev.outputs[i] = eval(spec, w, p.x);
        }
        if (hits_probability_floor(loss, ev.outputs[i])) ++ev.floor_hits;
        ev.objective += loss_value(loss, p.y_star, ev.outputs[i]);
    }
    if (reg.active()) {
        const ParamVector rg = regularizer_grad(reg, w);
        for (std::size_t j = 0; j < w.size(); ++j) ev.gradient[j] += rg[j];
        ev.objective += regularizer_value(reg, w);
    }
    return ev;
}

double norm(std::span<const double> v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    return std::sqrt(sq);
}

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

ParamVector apply_update(std::span<const double> w, std::span<const double> gradient, double epsilon) {
    ParamVector next(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) next[j] = w[j] - epsilon * gradient[j];
    return next;
}

}  // namespace

ParamVector gd_step(const ModelSpec& spec, const LossSpec& loss, const RegularizerSpec& reg,
                    std::span<const double> w, std::span<const DataPoint> data,
                    const std::vector<bool>& mask, double epsilon, std::uint64_t step_index) {
    if (mask.size() != data.size()) throw DimensionError("mask length does not match data", -1);
    const StepEval ev = evaluate_step(spec, loss, reg, w, data, mask);
    if (!all_finite(ev.gradient))
        throw DivergenceError("non-finite gradient at step " + std::to_string(step_index), step_index,
                              norm(ev.gradient), {});
    return apply_update(w, ev.gradient, epsilon);
}

TrainResult train(const ModelSpec& spec, const LossSpec& loss, const RegularizerSpec& reg,
                  std::vector<DataPoint> data, ParamVector init, const TrainConfig& cfg,
                  std::uint64_t seed) {
    spec.validate();
    reg.validate();
    if (data.empty()) throw ConfigError("training data is empty");
    check_data(spec, data);
    check_params(spec, init);
    cfg.validate(data.size());

    TrainResult result;
    Trajectory& traj = result.trajectory;
    traj.spec = spec;
    traj.loss = loss;
    traj.reg = reg;
    traj.data = std::move(data);
    traj.train = cfg;
    traj.seed = seed;
    TrainLog& log = result.log;

    const std::size_t m = traj.data.size();
    std::optional<MinibatchSampler> sampler;
    if (cfg.mode == BatchMode::Minibatch) sampler.emplace(m, cfg.batch_size, cfg.minibatch_seed);
    auto next_mask = [&] { return sampler ? sampler->draw() : std::vector<bool>(m, true); };

    ParamVector w = std::move(init);
    double initial_objective = 0.0;
    for (std::uint64_t s = 0;; ++s) {
        std::vector<bool> mask = next_mask();
        StepEval ev = evaluate_step(spec, loss, reg, w, traj.data, mask);
        log.floor_hits += ev.floor_hits;
        if (s == 0) initial_objective = ev.objective;

        const bool unstable = !std::isfinite(ev.objective) || !all_finite(ev.gradient) ||
                              (initial_objective > 0.0 && ev.objective > kDivergenceFactor * initial_objective);
        if (unstable) {
            log.diverged = true;
            log.diverged_at = s;
            const double gnorm = norm(ev.gradient);
            throw DivergenceError("training diverged at step " + std::to_string(s) + " (objective " +
                                      std::to_string(ev.objective) + ", gradient norm " +
                                      std::to_string(gnorm) + ")",
                                  s, gnorm, std::move(result));
        }
        log.loss_curve.push_back(ev.objective);

        const bool last = s == cfg.steps;
        if (last || s % cfg.checkpoint_stride == 0) {
            Checkpoint c;
            c.step = s;
            c.w = w;
            c.epsilon = cfg.epsilon;
            c.mask = mask;
            if (cfg.record_outputs) c.outputs = std::move(ev.outputs);
            traj.checkpoints.push_back(std::move(c));
        }
        if (last) break;
        w = apply_update(w, ev.gradient, cfg.epsilon);
    }
    return result;
}

ReplayReport replay_check(const Trajectory& traj) {
    ReplayReport report;
    if (traj.checkpoints.empty()) {
        report.message = "trajectory has no checkpoints";
        return report;
    }
    if (traj.stride() != 1) {
        report.message = "replay requires a stride-1 trajectory";
        return report;
    }
    for (std::size_t k = 0; k < traj.checkpoints.size(); ++k) {
        const Checkpoint& c = traj.checkpoints[k];
        if (c.step != k) {
            report.first_mismatch_step = c.step;
            report.message = "checkpoint " + std::to_string(k) + " has step index " + std::to_string(c.step);
            return report;
        }
        if (!c.outputs.empty()) {
            for (std::size_t i = 0; i < traj.data.size(); ++i) {
                if (eval(traj.spec, c.w, traj.data[i].x) != c.outputs[i]) {
                    report.first_mismatch_step = c.step;
                    report.message = "recorded output of point " + std::to_string(i) + " differs at step " +
                                     std::to_string(c.step);
                    return report;
                }
            }
        }
        if (k + 1 == traj.checkpoints.size()) break;
        ParamVector next;
        try {
            next = gd_step(traj.spec, traj.loss, traj.reg, c.w, traj.data, c.mask, c.epsilon, c.step);
        } catch (const Error& e) {
            report.first_mismatch_step = c.step;
            report.message = e.what();
            return report;
        }
        if (next != traj.checkpoints[k + 1].w) {
            report.first_mismatch_step = c.step;
            report.message = "transition from step " + std::to_string(c.step) + " does not reproduce";
            return report;
        }
    }
    report.ok = true;
    report.message = "all " + std::to_string(traj.checkpoints.size() - 1) + " transitions reproduce";
    return report;
}

}  // namespace pathkernel
