#include "pathkernel/verify.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <numeric>

#include "pathkernel/error.hpp"

namespace pathkernel::verify {

ParamVector fd_gradient(const ModelSpec& spec, std::span<const double> w, std::span<const double> x, double h) {
    if (!(h > 0.0)) throw Error("finite-difference step must be positive");
    ParamVector g(w.size());
    ParamVector probe(w.begin(), w.end());
    for (std::size_t j = 0; j < w.size(); ++j) {
        probe[j] = w[j] + h;
        const double up = eval(spec, probe, x);
        probe[j] = w[j] - h;
        const double down = eval(spec, probe, x);
        probe[j] = w[j];
        g[j] = (up - down) / (2.0 * h);
    }
    return g;
}

double max_relative_error(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("max_relative_error: length mismatch");
    double worst = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
        worst = std::max(worst, std::abs(a[j] - b[j]) / std::max(1.0, std::abs(b[j])));
    return worst;
}

ParamVector linear_flow_oracle(const ModelSpec& spec, std::span<const DataPoint> data, std::span<const double> w0,
                               double T) {
    if (spec.kind != ModelKind::Linear) throw Error("linear_flow_oracle needs a linear model");
    const auto n = static_cast<Eigen::Index>(spec.input_dim());
    const bool bias = spec.bias[0];
    const Eigen::Index d = n + (bias ? 1 : 0);
    if (static_cast<Eigen::Index>(w0.size()) != d) throw DimensionError("w0 length does not match model", -1);

    Eigen::MatrixXd X(static_cast<Eigen::Index>(data.size()), d);
    Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const DataPoint& p = data[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n; ++j) X(i, j) = p.x[static_cast<std::size_t>(j)];
        if (bias) X(i, n) = 1.0;
        y(i) = p.y_star;
    }
    const Eigen::MatrixXd A = X.transpose() * X;
    const Eigen::VectorXd c = X.transpose() * y;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
    const Eigen::MatrixXd& V = eig.eigenvectors();
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const Eigen::VectorXd u0 = V.transpose() * Eigen::Map<const Eigen::VectorXd>(w0.data(), d);
    const Eigen::VectorXd cu = V.transpose() * c;

    const double cutoff = 1e-12 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
    Eigen::VectorXd u(d);
    for (Eigen::Index k = 0; k < d; ++k) {
        if (lambda(k) > cutoff) {
            const double fixed = cu(k) / lambda(k);
            u(k) = fixed + std::exp(-lambda(k) * T) * (u0(k) - fixed);
        } else {
            u(k) = u0(k);
        }
    }
    const Eigen::VectorXd w = V * u;
    return ParamVector(w.data(), w.data() + d);
}

PsdResult psd_check(const GramMatrix& gram, double tol) {
    const auto n = static_cast<Eigen::Index>(gram.size);
    if (n == 0) throw Error("psd_check on an empty matrix");
    Eigen::MatrixXd M(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            M(i, j) = gram(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            if (j < i && std::abs(M(i, j) - M(j, i)) > 1e-9)
                throw Error("gram matrix is not symmetric at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
        }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
    PsdResult r;
    r.min_eigenvalue = eig.eigenvalues().minCoeff();
    r.max_eigenvalue = eig.eigenvalues().maxCoeff();
    r.psd = r.min_eigenvalue >= -tol * std::max(1.0, r.max_eigenvalue);
    return r;
}

std::vector<Vector> held_out_queries(std::span<const DataPoint> data, std::size_t count) {
    if (data.size() < 2) throw InsufficientDataError("held-out queries need at least two training points");
    const std::size_t dim = data.front().x.size();
    Vector lo = data.front().x;
    Vector hi = data.front().x;
    for (const auto& p : data)
        for (std::size_t j = 0; j < dim; ++j) {
            lo[j] = std::min(lo[j], p.x[j]);
            hi[j] = std::max(hi[j], p.x[j]);
        }

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return data[a].x < data[b].x; });

    std::vector<Vector> queries;
    const std::size_t interpolated = count / 2;
    const std::size_t extrapolated = count - interpolated;
    for (std::size_t q = 0; q < interpolated; ++q) {
        const auto pair = static_cast<std::size_t>((static_cast<double>(q) + 0.5) *
                                                   static_cast<double>(data.size() - 1) /
                                                   static_cast<double>(interpolated));
        const Vector& a = data[order[pair]].x;
        const Vector& b = data[order[pair + 1]].x;
        Vector mid(dim);
        for (std::size_t j = 0; j < dim; ++j) mid[j] = 0.5 * (a[j] + b[j]);
        queries.push_back(std::move(mid));
    }
    const double per_side = std::ceil(static_cast<double>(extrapolated) / 2.0);
    for (std::size_t q = 0; q < extrapolated; ++q) {
        const double frac = static_cast<double>(q / 2 + 1) / per_side;
        Vector v(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            const double width = hi[j] - lo[j];
            v[j] = q % 2 == 0 ? lo[j] - frac * width : hi[j] + frac * width;
        }
        queries.push_back(std::move(v));
    }
    return queries;
}

double max_reconstruction_error(const Trajectory& traj, std::span<const Vector> queries, KernelOptions options) {
    const PathKernelEngine engine(traj, options);
    double worst = 0.0;
    for (const auto& q : queries) {
        const double y_hat = engine.reconstruct(q).y_hat;
        const double y_net = engine.final_output(q);
        worst = std::max(worst, std::abs(y_hat - y_net) / std::max(1.0, std::abs(y_net)));
    }
    return worst;
}

bool monotone_nonincreasing(std::span<const double> errors, double slack) {
    for (std::size_t k = 0; k + 1 < errors.size(); ++k)
        if (!(errors[k + 1] <= errors[k] * slack)) return false;
    return true;
}

double log_log_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw Error("log_log_slope needs at least two paired points");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += std::log(x[k]);
        my += std::log(y[k]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double dx = std::log(x[k]) - mx;
        sxy += dx * (std::log(y[k]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

SweepResult epsilon_sweep(const SweepConfig& base, std::vector<double> epsilons) {
    if (epsilons.size() < 3) throw InsufficientDataError("epsilon sweep needs at least 3 epsilon values");
    std::sort(epsilons.begin(), epsilons.end(), std::greater<>());
    if (std::adjacent_find(epsilons.begin(), epsilons.end()) != epsilons.end())
        throw ConfigError("epsilon sweep values must be distinct");
    if (!(epsilons.back() > 0.0)) throw ConfigError("epsilon sweep values must be positive");
    if (base.queries.empty()) throw ConfigError("epsilon sweep needs at least one query");

    struct Point {
        double error = 0.0;
        std::uint64_t steps = 0;
        std::optional<std::string> failure;
    };
    auto run = [&base](double eps) {
        Point pt;
        TrainConfig cfg = base.train;
        cfg.epsilon = eps;
        cfg.steps = static_cast<std::uint64_t>(std::llround(base.total_time / eps));
        pt.steps = cfg.steps;
        try {
            const TrainResult tr = train(base.spec, base.loss, base.reg, base.data, base.init, cfg, base.seed);
            pt.error = max_reconstruction_error(tr.trajectory, base.queries);
            if (!std::isfinite(pt.error)) pt.failure = "non-finite reconstruction error";
        } catch (const DivergenceError& e) {
            pt.failure = e.what();
        }
        return pt;
    };

    std::vector<std::future<Point>> futures;
    futures.reserve(epsilons.size());
    for (double eps : epsilons) futures.push_back(std::async(std::launch::async, run, eps));

    SweepResult result;
    for (std::size_t k = 0; k < epsilons.size(); ++k) {
        Point pt = futures[k].get();
        if (pt.failure) {
            result.dropped_epsilons.push_back(epsilons[k]);
            result.warnings.push_back("epsilon " + std::to_string(epsilons[k]) + " dropped: " + *pt.failure);
            continue;
        }
        result.epsilons.push_back(epsilons[k]);
        result.errors.push_back(pt.error);
        result.steps.push_back(pt.steps);
    }
    if (result.epsilons.size() < 3)
        throw InsufficientDataError("only " + std::to_string(result.epsilons.size()) +
                                    " epsilon values survived; at least 3 are required");

    const bool positive = std::all_of(result.errors.begin(), result.errors.end(), [](double e) { return e > 0.0; });
    if (base.spec.kind != ModelKind::Linear && positive)
        result.fitted_slope = log_log_slope(result.epsilons, result.errors);
    return result;
}

SgdMaskReport sgd_mask_check(const SgdCheckConfig& config) {
    TrainConfig cfg;
    cfg.epsilon = config.epsilon;
    cfg.steps = config.steps;
    cfg.mode = BatchMode::Minibatch;
    cfg.batch_size = config.batch_size;
    cfg.minibatch_seed = config.minibatch_seed;
    const TrainResult mb = train(config.spec, config.loss, config.reg, config.data, config.init, cfg);
    cfg.mode = BatchMode::Batch;
    cfg.batch_size = 0;
    const TrainResult full = train(config.spec, config.loss, config.reg, config.data, config.init, cfg);

    SgdMaskReport report;
    report.minibatch_error = max_reconstruction_error(mb.trajectory, config.queries);
    report.batch_error = max_reconstruction_error(full.trajectory, config.queries);
    report.same_order = report.minibatch_error <= 10.0 * report.batch_error + 1e-9;

    const Trajectory& traj = mb.trajectory;
    const std::size_t m = traj.num_points();
    for (std::size_t i = 0; i < m; ++i) {
        bool sampled = false;
        for (std::size_t k = 0; k + 1 < traj.checkpoints.size(); ++k) sampled = sampled || traj.checkpoints[k].mask[i];
        if (!sampled) report.never_sampled.push_back(i);
    }

    const PathKernelEngine engine(traj);
    report.never_sampled_zero = true;
    for (const auto& q : config.queries) {
        const AttributionReport attr = engine.attribute(q, m);
        for (const Attribution& entry : attr.ranked) {
            const bool never = std::find(report.never_sampled.begin(), report.never_sampled.end(), entry.position) !=
                               report.never_sampled.end();
            if (never && entry.contribution != 0.0) report.never_sampled_zero = false;
        }
    }

    if (config.batch_size == m) {
        bool same = true;
        const PathKernelEngine batch_engine(full.trajectory);
        for (const auto& q : config.queries) {
            const Reconstruction a = engine.reconstruct(q);
            const Reconstruction b = batch_engine.reconstruct(q);
            same = same && a.y_hat == b.y_hat && a.klp == b.klp && a.k == b.k;
        }
        report.identical_to_batch = same;
    }
    report.ok = report.same_order && report.never_sampled_zero && report.identical_to_batch.value_or(true);
    return report;
}

}  // namespace pathkernel::verify
