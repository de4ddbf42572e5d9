#pragma once

#include <json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pathkernel/flow.hpp"
#include "pathkernel/kernel.hpp"
#include "pathkernel/verify.hpp"

namespace pathkernel::report {

using Json = nlohmann::ordered_json;

/// Shortest round-trip text for a double ("%.17g").
[[nodiscard]] std::string format_double(double v);

/// {format_version, config_hash, seed} embedded in every report.
[[nodiscard]] Json header(const Trajectory& traj);
[[nodiscard]] Json trajectory_summary(const Trajectory& traj);

[[nodiscard]] Json run_log(const Trajectory& traj, const TrainLog& log, double wall_seconds);

/// `quadrature_error` is reported only for stride > 1 trajectories.
[[nodiscard]] Json reconstruction_json(const Trajectory& traj, std::span<const Reconstruction> recs,
                                       std::span<const std::optional<double>> quadrature_error);
/// Columns: query,i,id,a,k,klp,flagged
[[nodiscard]] std::string reconstruction_csv(const Trajectory& traj, std::span<const Reconstruction> recs);

[[nodiscard]] Json attribution_json(const Trajectory& traj, const Vector& query,
                                    const AttributionReport& attr, double y_net, std::size_t top_k);
/// Columns: rank,i,id,contribution,a,k,flagged
[[nodiscard]] std::string attribution_csv(const AttributionReport& attr);
/// Tangent kernel K^g(x, x_i) at each checkpoint for the ranked examples.
/// Columns: step,t,k_<id>...
[[nodiscard]] std::string attribution_path_csv(const Trajectory& traj, const Vector& query,
                                               const AttributionReport& attr);

[[nodiscard]] Json sweep_json(const verify::SweepResult& sweep, double total_time, std::uint64_t config_hash,
                              std::uint64_t seed);
/// Columns: epsilon,steps,max_rel_err
[[nodiscard]] std::string sweep_csv(const verify::SweepResult& sweep);

/// Columns: i,j,value (upper triangle including the diagonal)
[[nodiscard]] std::string gram_csv(const GramMatrix& gram);

}  // namespace pathkernel::report
