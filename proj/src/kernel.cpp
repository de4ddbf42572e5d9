#include "pathkernel/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pathkernel/error.hpp"
#include "pathkernel/loss.hpp"

namespace pathkernel {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
    return acc;
}

/// Checkpoints that carry quadrature weight (all but the last).
std::size_t weighted_checkpoints(const Trajectory& traj) {
    return traj.checkpoints.empty() ? 0 : traj.checkpoints.size() - 1;
}

}  // namespace

std::size_t Reconstruction::flagged_count() const {
    return static_cast<std::size_t>(std::count(denominator_flags.begin(), denominator_flags.end(), true));
}

double Reconstruction::y_hat_from_weights() const {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += denominator_flags[i] ? -klp[i] : a[i] * k[i];
    return b + sum;
}

PathKernelEngine::PathKernelEngine(const Trajectory& traj, KernelOptions options)
    : traj_(traj), options_(options) {
    if (traj.checkpoints.empty()) throw Error("trajectory has no checkpoints");
    const std::size_t m = traj.num_points();
    const std::size_t d = traj.num_params();
    const std::size_t n = weighted_checkpoints(traj);
    const bool have_outputs = traj.has_outputs();
    if (!have_outputs && !options_.recompute_outputs)
        throw Error("trajectory has no recorded outputs and recomputation is disabled");

    const double bytes = static_cast<double>(n) * static_cast<double>(m) * static_cast<double>(d) * 8.0;
    const bool cache = bytes <= static_cast<double>(options_.cache_limit_bytes);
    if (cache) grad_cache_.resize(n);

    coef_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const Checkpoint& c = traj.checkpoints[k];
        const double weight = traj.quadrature_weight(k);
        if (cache) grad_cache_[k].resize(m * d);
        coef_[k].resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            const DataPoint& p = traj.data[i];
            double y;
            if (cache) {
                EvalGrad eg = eval_and_grad(traj.spec, c.w, p.x);
                std::copy(eg.grad.begin(), eg.grad.end(), grad_cache_[k].begin() + static_cast<std::ptrdiff_t>(i * d));
                y = have_outputs ? c.outputs[i] : eg.value;
            } else {
                y = have_outputs ? c.outputs[i] : eval(traj.spec, c.w, p.x);
            }
            coef_[k][i] = c.mask[i] ? weight * loss_derivative(traj.loss, p.y_star, y) : 0.0;
        }
    }
}

ParamVector PathKernelEngine::training_gradient(std::size_t k, std::size_t i) const {
    if (!grad_cache_.empty()) {
        const std::size_t d = traj_.num_params();
        const auto begin = grad_cache_[k].begin() + static_cast<std::ptrdiff_t>(i * d);
        return ParamVector(begin, begin + static_cast<std::ptrdiff_t>(d));
    }
    return grad_params(traj_.spec, traj_.checkpoints[k].w, traj_.data[i].x);
}

PathKernelEngine::QueryTerms PathKernelEngine::accumulate(std::span<const double> x) const {
    const std::size_t m = traj_.num_points();
    const std::size_t d = traj_.num_params();
    QueryTerms t;
    t.k.assign(m, 0.0);
    t.klp.assign(m, 0.0);
    for (std::size_t k = 0; k < coef_.size(); ++k) {
        const Checkpoint& c = traj_.checkpoints[k];
        const double weight = traj_.quadrature_weight(k);
        const ParamVector gx = grad_params(traj_.spec, c.w, x);
        t.k_self += weight * dot(gx, gx);
        for (std::size_t i = 0; i < m; ++i) {
            double kg;
            if (!grad_cache_.empty()) {
                kg = dot(gx, std::span<const double>(grad_cache_[k]).subspan(i * d, d));
            } else {
                kg = dot(gx, grad_params(traj_.spec, c.w, traj_.data[i].x));
            }
            t.k[i] += weight * kg;
            t.klp[i] += coef_[k][i] * kg;
        }
        if (traj_.reg.active()) t.reg += weight * dot(gx, regularizer_grad(traj_.reg, c.w));
    }
    return t;
}

double PathKernelEngine::path_kernel(std::span<const double> x, std::span<const double> x_prime) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < coef_.size(); ++k) {
        const Checkpoint& c = traj_.checkpoints[k];
        acc += traj_.quadrature_weight(k) *
               dot(grad_params(traj_.spec, c.w, x), grad_params(traj_.spec, c.w, x_prime));
    }
    return acc;
}

double PathKernelEngine::loss_weighted_path_kernel(std::span<const double> x, std::size_t i) const {
    if (i >= traj_.num_points()) throw Error("training point " + std::to_string(i) + " out of range");
    double acc = 0.0;
    for (std::size_t k = 0; k < coef_.size(); ++k) {
        const ParamVector gx = grad_params(traj_.spec, traj_.checkpoints[k].w, x);
        acc += coef_[k][i] * dot(gx, training_gradient(k, i));
    }
    return acc;
}

ExampleWeights PathKernelEngine::example_weights(std::span<const double> x) const {
    const Reconstruction r = reconstruct(x);
    return {r.a, r.denominator_flags};
}

double PathKernelEngine::regularization_offset(std::span<const double> x) const {
    if (!traj_.reg.active()) return 0.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < coef_.size(); ++k) {
        const Checkpoint& c = traj_.checkpoints[k];
        acc += traj_.quadrature_weight(k) *
               dot(grad_params(traj_.spec, c.w, x), regularizer_grad(traj_.reg, c.w));
    }
    return -acc;
}

Reconstruction PathKernelEngine::reconstruct(std::span<const double> x) const {
    const std::size_t m = traj_.num_points();
    Reconstruction r;
    r.query.assign(x.begin(), x.end());
    r.y0 = eval(traj_.spec, traj_.checkpoints.front().w, x);

    QueryTerms t = accumulate(x);
    r.reg_offset = traj_.reg.active() ? -t.reg : 0.0;
    r.b = r.y0 + r.reg_offset;
    r.k = std::move(t.k);
    r.klp = std::move(t.klp);
    r.k_self = t.k_self;

    r.a.assign(m, 0.0);
    r.denominator_flags.assign(m, false);
    const double threshold = kDenominatorTolerance * r.k_self;
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sum += r.klp[i];
        if (std::abs(r.k[i]) > threshold) {
            r.a[i] = -r.klp[i] / r.k[i];
        } else {
            r.denominator_flags[i] = true;
        }
    }
    r.y_hat = r.b - sum;
    r.y_net = r.y_hat;  // overwritten by callers that have the final model
    return r;
}

AttributionReport PathKernelEngine::attribute(std::span<const double> x, std::size_t top_k) const {
    const std::size_t m = traj_.num_points();
    if (top_k < 1 || top_k > m)
        throw Error("top_k must be in [1, " + std::to_string(m) + "], got " + std::to_string(top_k));
    const Reconstruction r = reconstruct(x);
    AttributionReport report;
    report.y_hat = r.y_hat;
    report.b = r.b;
    std::vector<Attribution> all(m);
    for (std::size_t i = 0; i < m; ++i) {
        all[i] = {i, traj_.data[i].index, -r.klp[i], r.a[i], r.k[i], static_cast<bool>(r.denominator_flags[i])};
        report.total_contribution += all[i].contribution;
    }
    std::stable_sort(all.begin(), all.end(), [](const Attribution& lhs, const Attribution& rhs) {
        return std::abs(lhs.contribution) > std::abs(rhs.contribution);
    });
    all.resize(top_k);
    report.ranked = std::move(all);
    return report;
}

GramMatrix PathKernelEngine::path_gram(std::span<const Vector> points) const {
    GramMatrix g;
    g.size = points.size();
    g.points.resize(g.size);
    std::iota(g.points.begin(), g.points.end(), std::int64_t{0});
    g.values.assign(g.size * g.size, 0.0);
    std::vector<ParamVector> grads(g.size);
    for (std::size_t k = 0; k < coef_.size(); ++k) {
        const Checkpoint& c = traj_.checkpoints[k];
        const double weight = traj_.quadrature_weight(k);
        for (std::size_t p = 0; p < g.size; ++p) grads[p] = grad_params(traj_.spec, c.w, points[p]);
        for (std::size_t p = 0; p < g.size; ++p)
            for (std::size_t q = p; q < g.size; ++q) g.at(p, q) += weight * dot(grads[p], grads[q]);
    }
    for (std::size_t p = 0; p < g.size; ++p)
        for (std::size_t q = 0; q < p; ++q) g.at(p, q) = g(q, p);
    return g;
}

double PathKernelEngine::final_output(std::span<const double> x) const {
    return eval(traj_.spec, traj_.checkpoints.back().w, x);
}

double tangent_kernel(const ModelSpec& spec, std::span<const double> w, std::span<const double> x,
                      std::span<const double> x_prime) {
    return dot(grad_params(spec, w, x), grad_params(spec, w, x_prime));
}

GramMatrix tangent_gram(const ModelSpec& spec, std::span<const double> w, std::span<const Vector> points) {
    if (points.empty()) throw Error("tangent_gram needs at least one point");
    GramMatrix g;
    g.size = points.size();
    g.points.resize(g.size);
    std::iota(g.points.begin(), g.points.end(), std::int64_t{0});
    g.values.assign(g.size * g.size, 0.0);
    std::vector<ParamVector> grads;
    grads.reserve(g.size);
    for (const auto& p : points) grads.push_back(grad_params(spec, w, p));
    for (std::size_t p = 0; p < g.size; ++p)
        for (std::size_t q = p; q < g.size; ++q) g.at(p, q) = g.at(q, p) = dot(grads[p], grads[q]);
    return g;
}

double path_kernel(const Trajectory& traj, std::span<const double> x, std::span<const double> x_prime) {
    KernelOptions options;
    options.cache_limit_bytes = 0;
    return PathKernelEngine(traj, options).path_kernel(x, x_prime);
}

double loss_weighted_path_kernel(const Trajectory& traj, std::span<const double> x, std::size_t i,
                                 KernelOptions options) {
    options.cache_limit_bytes = 0;
    return PathKernelEngine(traj, options).loss_weighted_path_kernel(x, i);
}

ExampleWeights example_weights(const Trajectory& traj, std::span<const double> x, KernelOptions options) {
    return PathKernelEngine(traj, options).example_weights(x);
}

double regularization_offset(const Trajectory& traj, std::span<const double> x) {
    KernelOptions options;
    options.cache_limit_bytes = 0;
    return PathKernelEngine(traj, options).regularization_offset(x);
}

Reconstruction reconstruct(const Trajectory& traj, std::span<const double> x, KernelOptions options) {
    const PathKernelEngine engine(traj, options);
    Reconstruction r = engine.reconstruct(x);
    r.y_net = engine.final_output(x);
    return r;
}

AttributionReport attribute(const Trajectory& traj, std::span<const double> x, std::size_t top_k,
                            KernelOptions options) {
    return PathKernelEngine(traj, options).attribute(x, top_k);
}

GramMatrix path_gram(const Trajectory& traj, std::span<const Vector> points) {
    KernelOptions options;
    options.cache_limit_bytes = 0;
    return PathKernelEngine(traj, options).path_gram(points);
}

Trajectory thin_trajectory(const Trajectory& traj, std::size_t factor) {
    if (factor == 0) throw Error("thinning factor must be positive");
    Trajectory out = traj;
    out.checkpoints.clear();
    for (std::size_t k = 0; k < traj.checkpoints.size(); ++k)
        if (k % factor == 0 || k + 1 == traj.checkpoints.size()) out.checkpoints.push_back(traj.checkpoints[k]);
    out.train.checkpoint_stride = traj.train.checkpoint_stride * factor;
    return out;
}

double quadrature_error_estimate(const Trajectory& traj, std::span<const double> probe, KernelOptions options) {
    const double fine = PathKernelEngine(traj, options).reconstruct(probe).y_hat;
    const Trajectory coarse = thin_trajectory(traj, 2);
    const double rough = PathKernelEngine(coarse, options).reconstruct(probe).y_hat;
    return std::abs(fine - rough);
}

}  // namespace pathkernel
