#include "pathkernel/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "pathkernel/config.hpp"
#include "pathkernel/trajectory_io.hpp"

namespace pathkernel::report {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Json header(const Trajectory& traj) {
    Json j;
    j["format_version"] = kTrajectoryFormatVersion;
    j["config_hash"] = hex64(traj.config_hash);
    j["seed"] = traj.seed;
    return j;
}

Json trajectory_summary(const Trajectory& traj) {
    Json j;
    j["model"] = std::string(to_string(traj.spec.kind));
    j["layer_sizes"] = traj.spec.layer_sizes;
    j["activation"] = std::string(to_string(traj.spec.activation));
    j["loss"] = std::string(to_string(traj.loss.kind));
    j["regularizer"] = std::string(to_string(traj.reg.kind));
    j["lambda"] = traj.reg.lambda;
    j["m"] = traj.num_points();
    j["d"] = traj.num_params();
    j["steps"] = traj.steps();
    j["stride"] = traj.stride();
    j["epsilon"] = traj.train.epsilon;
    j["mode"] = traj.train.mode == BatchMode::Batch ? "batch" : "minibatch";
    if (traj.train.mode == BatchMode::Minibatch) j["batch_size"] = traj.train.batch_size;
    j["outputs_recorded"] = traj.has_outputs();
    return j;
}

Json run_log(const Trajectory& traj, const TrainLog& log, double wall_seconds) {
    Json j = header(traj);
    j["trajectory"] = trajectory_summary(traj);
    j["initial_loss"] = log.loss_curve.empty() ? 0.0 : log.loss_curve.front();
    j["final_loss"] = log.loss_curve.empty() ? 0.0 : log.loss_curve.back();
    j["diverged"] = log.diverged;
    if (log.diverged) j["diverged_at"] = log.diverged_at;
    j["divergence_threshold_factor"] = kDivergenceFactor;
    j["probability_floor_hits"] = log.floor_hits;
    j["loss_curve"] = log.loss_curve;
    j["wall_time_seconds"] = wall_seconds;
    return j;
}

Json reconstruction_json(const Trajectory& traj, std::span<const Reconstruction> recs,
                         std::span<const std::optional<double>> quadrature_error) {
    Json j = header(traj);
    j["trajectory"] = trajectory_summary(traj);
    Json queries = Json::array();
    for (std::size_t q = 0; q < recs.size(); ++q) {
        const Reconstruction& r = recs[q];
        const double abs_err = std::abs(r.y_hat - r.y_net);
        Json e;
        e["query"] = r.query;
        e["y_net"] = r.y_net;
        e["y_hat"] = r.y_hat;
        e["b"] = r.b;
        e["y0"] = r.y0;
        e["reg_offset"] = r.reg_offset;
        e["abs_err"] = abs_err;
        e["rel_err"] = abs_err / std::max(1.0, std::abs(r.y_net));
        e["flagged_count"] = r.flagged_count();
        e["k_self"] = r.k_self;
        if (q < quadrature_error.size() && quadrature_error[q]) e["quadrature_error_estimate"] = *quadrature_error[q];
        queries.push_back(std::move(e));
    }
    j["queries"] = std::move(queries);
    return j;
}

std::string reconstruction_csv(const Trajectory& traj, std::span<const Reconstruction> recs) {
    std::ostringstream out;
    out << "query,i,id,a,k,klp,flagged\n";
    for (std::size_t q = 0; q < recs.size(); ++q) {
        const Reconstruction& r = recs[q];
        for (std::size_t i = 0; i < r.k.size(); ++i)
            out << q << ',' << i << ',' << traj.data[i].index << ',' << format_double(r.a[i]) << ','
                << format_double(r.k[i]) << ',' << format_double(r.klp[i]) << ',' << (r.denominator_flags[i] ? 1 : 0)
                << '\n';
    }
    return out.str();
}

Json attribution_json(const Trajectory& traj, const Vector& query, const AttributionReport& attr, double y_net,
                      std::size_t top_k) {
    Json j = header(traj);
    j["query"] = query;
    j["top_k"] = top_k;
    j["y_net"] = y_net;
    j["y_hat"] = attr.y_hat;
    j["b"] = attr.b;
    j["total_contribution"] = attr.total_contribution;
    const double gap = std::abs(attr.total_contribution - (attr.y_hat - attr.b));
    j["conservation_error"] = gap / std::max(1.0, std::abs(attr.y_hat - attr.b));
    Json ranked = Json::array();
    for (std::size_t r = 0; r < attr.ranked.size(); ++r) {
        const Attribution& a = attr.ranked[r];
        Json e;
        e["rank"] = r + 1;
        e["i"] = a.position;
        e["id"] = a.id;
        e["contribution"] = a.contribution;
        e["a"] = a.a;
        e["k"] = a.k;
        e["flagged"] = a.flagged;
        ranked.push_back(std::move(e));
    }
    j["ranked"] = std::move(ranked);
    return j;
}

std::string attribution_csv(const AttributionReport& attr) {
    std::ostringstream out;
    out << "rank,i,id,contribution,a,k,flagged\n";
    for (std::size_t r = 0; r < attr.ranked.size(); ++r) {
        const Attribution& a = attr.ranked[r];
        out << r + 1 << ',' << a.position << ',' << a.id << ',' << format_double(a.contribution) << ','
            << format_double(a.a) << ',' << format_double(a.k) << ',' << (a.flagged ? 1 : 0) << '\n';
    }
    return out.str();
}

std::string attribution_path_csv(const Trajectory& traj, const Vector& query, const AttributionReport& attr) {
    std::ostringstream out;
    out << "step,t";
    for (const Attribution& a : attr.ranked) out << ",k_" << a.id;
    out << '\n';
    double t = 0.0;
    for (std::size_t k = 0; k < traj.checkpoints.size(); ++k) {
        const Checkpoint& c = traj.checkpoints[k];
        out << c.step << ',' << format_double(t);
        for (const Attribution& a : attr.ranked)
            out << ',' << format_double(tangent_kernel(traj.spec, c.w, query, traj.data[a.position].x));
        out << '\n';
        t += traj.quadrature_weight(k);
    }
    return out.str();
}

Json sweep_json(const verify::SweepResult& sweep, double total_time, std::uint64_t config_hash, std::uint64_t seed) {
    Json j;
    j["format_version"] = kTrajectoryFormatVersion;
    j["config_hash"] = hex64(config_hash);
    j["seed"] = seed;
    j["total_time"] = total_time;
    j["epsilons"] = sweep.epsilons;
    j["steps"] = sweep.steps;
    j["max_rel_err"] = sweep.errors;
    j["monotone_nonincreasing"] = verify::monotone_nonincreasing(sweep.errors);
    if (sweep.fitted_slope) {
        j["fitted_slope"] = *sweep.fitted_slope;
    } else {
        j["fitted_slope"] = nullptr;
    }
    j["dropped_epsilons"] = sweep.dropped_epsilons;
    j["warnings"] = sweep.warnings;
    return j;
}

std::string sweep_csv(const verify::SweepResult& sweep) {
    std::ostringstream out;
    out << "epsilon,steps,max_rel_err\n";
    for (std::size_t k = 0; k < sweep.epsilons.size(); ++k)
        out << format_double(sweep.epsilons[k]) << ',' << sweep.steps[k] << ',' << format_double(sweep.errors[k])
            << '\n';
    return out.str();
}

std::string gram_csv(const GramMatrix& gram) {
    std::ostringstream out;
    out << "i,j,value\n";
    for (std::size_t i = 0; i < gram.size; ++i)
        for (std::size_t j = i; j < gram.size; ++j)
            out << gram.points[i] << ',' << gram.points[j] << ',' << format_double(gram(i, j)) << '\n';
    return out.str();
}

}  // namespace pathkernel::report
