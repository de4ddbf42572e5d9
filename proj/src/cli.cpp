#include "pathkernel/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>

#include "pathkernel/config.hpp"
#include "pathkernel/error.hpp"
#include "pathkernel/flow.hpp"
#include "pathkernel/kernel.hpp"
#include "pathkernel/report.hpp"
#include "pathkernel/trajectory_io.hpp"
#include "pathkernel/verify.hpp"

namespace pathkernel::cli {

namespace fs = std::filesystem;
using report::Json;

namespace {

constexpr double kConsistencyTolerance = 1e-9;
constexpr std::size_t kMaxGramPoints = 64;

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw Error("failed writing " + path.string());
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path prepare_dir(const fs::path& dir) {
    fs::create_directories(dir);
    return dir;
}

fs::path default_out(const std::string& out, const fs::path& trajectory) {
    if (!out.empty()) return out;
    return trajectory.has_parent_path() ? trajectory.parent_path() : fs::path(".");
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

struct Options {
    std::string config;
    std::string trajectory;
    std::vector<std::string> queries;
    std::size_t top_k = 0;
    std::string out;
    std::string epsilons;
    bool no_recompute = false;
};

int cmd_train(const Options& opt, std::ostream& out) {
    const ExperimentConfig cfg = load_config(opt.config);
    const fs::path dir = opt.out.empty() ? cfg.output_dir : fs::path(opt.out);
    const ParamVector init = init_params(cfg.model, cfg.init, cfg.seed);

    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
    try {
        TrainResult result = train(cfg.model, cfg.loss, cfg.reg, cfg.data, init, cfg.train, cfg.seed);
        result.trajectory.config_hash = cfg.hash;
        prepare_dir(dir);
        save_trajectory(result.trajectory, dir / "trajectory.pkt");
        write_json(dir / "run_log.json", report::run_log(result.trajectory, result.log, elapsed()));
        out << "trained " << result.trajectory.steps() << " steps, final loss "
            << report::format_double(result.log.loss_curve.back()) << "\n"
            << "wrote " << (dir / "trajectory.pkt").string() << "\n";
        return kSuccess;
    } catch (const DivergenceError& e) {
        TrainResult partial = e.partial();
        partial.trajectory.config_hash = cfg.hash;
        prepare_dir(dir);
        if (!partial.trajectory.checkpoints.empty()) save_trajectory(partial.trajectory, dir / "trajectory.pkt");
        write_json(dir / "run_log.json", report::run_log(partial.trajectory, partial.log, elapsed()));
        throw;
    }
}

std::vector<Vector> collect_queries(const Options& opt, const Trajectory& traj) {
    std::vector<Vector> queries;
    for (const auto& q : opt.queries) queries.push_back(parse_float_list(q));
    if (queries.empty() && !opt.config.empty()) queries = load_config(opt.config).queries;
    if (queries.empty()) queries = verify::held_out_queries(traj.data);
    for (const auto& q : queries)
        if (q.size() != traj.spec.input_dim())
            throw ConfigError("query has " + std::to_string(q.size()) + " features, model expects " +
                              std::to_string(traj.spec.input_dim()));
    return queries;
}

KernelOptions kernel_options(const Options& opt) {
    KernelOptions k;
    k.recompute_outputs = !opt.no_recompute;
    return k;
}

int cmd_reconstruct(const Options& opt, std::ostream& out) {
    const Trajectory traj = load_trajectory(opt.trajectory);
    const std::vector<Vector> queries = collect_queries(opt, traj);
    const KernelOptions kopt = kernel_options(opt);
    const PathKernelEngine engine(traj, kopt);

    std::vector<Reconstruction> recs;
    std::vector<std::optional<double>> quad;
    for (const auto& q : queries) {
        Reconstruction r = engine.reconstruct(q);
        r.y_net = engine.final_output(q);
        recs.push_back(std::move(r));
        quad.push_back(traj.stride() > 1 ? std::optional<double>(quadrature_error_estimate(traj, q, kopt))
                                         : std::nullopt);
    }
    const fs::path dir = prepare_dir(default_out(opt.out, opt.trajectory));
    write_json(dir / "reconstruct.json", report::reconstruction_json(traj, recs, quad));
    write_text(dir / "reconstruct.csv", report::reconstruction_csv(traj, recs));
    for (const auto& r : recs)
        out << "y_net=" << report::format_double(r.y_net) << " y_hat=" << report::format_double(r.y_hat)
            << " rel_err=" << report::format_double(rel(r.y_hat, r.y_net)) << "\n";
    return kSuccess;
}

int cmd_attribute(const Options& opt, std::ostream& out) {
    const Trajectory traj = load_trajectory(opt.trajectory);
    if (opt.queries.size() != 1) throw ConfigError("attribute needs exactly one --query");
    const Vector query = collect_queries(opt, traj).front();
    const std::size_t top_k = opt.top_k == 0 ? traj.num_points() : opt.top_k;
    if (top_k > traj.num_points())
        throw ConfigError("--top-k must be in [1, " + std::to_string(traj.num_points()) + "]");
    const PathKernelEngine engine(traj, kernel_options(opt));
    const AttributionReport attr = engine.attribute(query, top_k);

    const fs::path dir = prepare_dir(default_out(opt.out, opt.trajectory));
    write_json(dir / "attribute.json",
               report::attribution_json(traj, query, attr, engine.final_output(query), top_k));
    write_text(dir / "attribute.csv", report::attribution_csv(attr));
    write_text(dir / "attribute_path.csv", report::attribution_path_csv(traj, query, attr));
    for (std::size_t r = 0; r < attr.ranked.size(); ++r)
        out << r + 1 << ". id " << attr.ranked[r].id << " contribution "
            << report::format_double(attr.ranked[r].contribution) << "\n";
    return kSuccess;
}

int cmd_sweep(const Options& opt, std::ostream& out) {
    const ExperimentConfig cfg = load_config(opt.config);
    if (opt.epsilons.empty()) throw ConfigError("sweep needs --epsilons");
    verify::SweepConfig base;
    base.spec = cfg.model;
    base.loss = cfg.loss;
    base.reg = cfg.reg;
    base.data = cfg.data;
    base.init = init_params(cfg.model, cfg.init, cfg.seed);
    base.total_time = cfg.train.epsilon * static_cast<double>(cfg.train.steps);
    base.train = cfg.train;
    base.queries = cfg.queries.empty() ? verify::held_out_queries(cfg.data) : cfg.queries;
    base.seed = cfg.seed;

    const verify::SweepResult sweep = verify::epsilon_sweep(base, parse_float_list(opt.epsilons));
    const fs::path dir = prepare_dir(opt.out.empty() ? cfg.output_dir : fs::path(opt.out));
    write_json(dir / "sweep.json", report::sweep_json(sweep, base.total_time, cfg.hash, cfg.seed));
    write_text(dir / "sweep.csv", report::sweep_csv(sweep));
    for (std::size_t k = 0; k < sweep.epsilons.size(); ++k)
        out << "epsilon=" << report::format_double(sweep.epsilons[k])
            << " max_rel_err=" << report::format_double(sweep.errors[k]) << "\n";
    if (sweep.fitted_slope) out << "fitted_slope=" << report::format_double(*sweep.fitted_slope) << "\n";
    return kSuccess;
}

Json verdict(const std::string& name, const std::string& status, Json detail) {
    Json j;
    j["name"] = name;
    j["status"] = status;
    j["detail"] = std::move(detail);
    return j;
}

int cmd_check(const Options& opt, std::ostream& out) {
    const Trajectory traj = load_trajectory(opt.trajectory);
    Json checks = Json::array();
    bool ok = true;
    auto record = [&](Json v) {
        ok = ok && v["status"] != "fail";
        out << v["name"].get<std::string>() << ": " << v["status"].get<std::string>() << "\n";
        checks.push_back(std::move(v));
    };

    if (traj.stride() == 1) {
        const ReplayReport replay = replay_check(traj);
        Json d;
        d["message"] = replay.message;
        if (replay.first_mismatch_step) d["first_mismatch_step"] = *replay.first_mismatch_step;
        record(verdict("replay", replay.ok ? "pass" : "fail", d));
    } else {
        record(verdict("replay", "skipped", Json{{"message", "stride > 1"}}));
    }

    std::optional<PathKernelEngine> engine;
    try {
        engine.emplace(traj, kernel_options(opt));
        record(verdict("outputs", "pass",
                       Json{{"recorded", traj.has_outputs()}, {"recomputed", !traj.has_outputs()}}));
    } catch (const Error& e) {
        record(verdict("outputs", "fail", Json{{"message", e.what()}}));
    }

    std::vector<Vector> points;
    for (const auto& p : traj.data) {
        if (points.size() == kMaxGramPoints) break;
        points.push_back(p.x);
    }
    const fs::path dir = prepare_dir(default_out(opt.out, opt.trajectory));
    if (engine) {
        const GramMatrix gram = engine->path_gram(points);
        const verify::PsdResult psd = verify::psd_check(gram, 1e-8);
        record(verdict("psd", psd.psd ? "pass" : "fail",
                       Json{{"points", gram.size},
                            {"min_eigenvalue", psd.min_eigenvalue},
                            {"max_eigenvalue", psd.max_eigenvalue}}));
        write_text(dir / "path_gram.csv", report::gram_csv(gram));

        double worst_pair = 0.0;
        double worst_total = 0.0;
        double worst_conservation = 0.0;
        double worst_exact = 0.0;
        std::vector<Vector> queries = points;
        if (traj.num_points() >= 2)
            for (auto& q : verify::held_out_queries(traj.data)) queries.push_back(std::move(q));
        for (const auto& q : queries) {
            const Reconstruction r = engine->reconstruct(q);
            for (std::size_t i = 0; i < r.k.size(); ++i)
                if (!r.denominator_flags[i])
                    worst_pair = std::max(worst_pair, std::abs(r.a[i] * r.k[i] + r.klp[i]) /
                                                          std::max(1.0, std::abs(r.klp[i])));
            worst_total = std::max(worst_total, rel(r.y_hat_from_weights(), r.y_hat));
            double total = 0.0;
            for (double v : r.klp) total -= v;
            worst_conservation = std::max(worst_conservation, rel(total, r.y_hat - r.b));
            worst_exact = std::max(worst_exact, rel(r.y_hat, engine->final_output(q)));
        }
        const bool consistent = worst_pair < kConsistencyTolerance && worst_total < kConsistencyTolerance &&
                                worst_conservation < kConsistencyTolerance;
        record(verdict("consistency", consistent ? "pass" : "fail",
                       Json{{"queries", queries.size()},
                            {"max_pair_rel_err", worst_pair},
                            {"max_total_rel_err", worst_total},
                            {"max_conservation_rel_err", worst_conservation}}));
        if (traj.spec.kind == ModelKind::Linear) {
            record(verdict("linear_exactness", worst_exact < kConsistencyTolerance ? "pass" : "fail",
                           Json{{"max_rel_err", worst_exact}}));
        } else {
            record(verdict("reconstruction_gap", "info", Json{{"max_rel_err", worst_exact}}));
        }
    }

    Json j = report::header(traj);
    j["trajectory"] = report::trajectory_summary(traj);
    j["passed"] = ok;
    j["checks"] = std::move(checks);
    write_json(dir / "check.json", j);
    return ok ? kSuccess : kCheckFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Train models by gradient descent and rebuild their predictions as path-kernel machines"};
    app.require_subcommand(1);
    Options opt;

    auto* train_cmd = app.add_subcommand("train", "train from a config and write the trajectory");
    train_cmd->add_option("--config", opt.config, "experiment config (JSON)")->required();
    train_cmd->add_option("--out", opt.out, "output directory (overrides output_dir)");

    auto* rec_cmd = app.add_subcommand("reconstruct", "kernel-machine reconstruction of predictions");
    rec_cmd->add_option("--trajectory", opt.trajectory, "trajectory file")->required();
    rec_cmd->add_option("--query", opt.queries, "comma-separated features; repeatable");
    rec_cmd->add_option("--config", opt.config, "take queries from this config");
    rec_cmd->add_option("--out", opt.out, "output directory");
    rec_cmd->add_flag("--no-recompute", opt.no_recompute, "fail instead of recomputing missing outputs");

    auto* attr_cmd = app.add_subcommand("attribute", "rank training examples by contribution to a prediction");
    attr_cmd->add_option("--trajectory", opt.trajectory, "trajectory file")->required();
    attr_cmd->add_option("--query", opt.queries, "comma-separated features")->required();
    attr_cmd->add_option("--top-k", opt.top_k, "number of examples to report (default all)");
    attr_cmd->add_option("--out", opt.out, "output directory");
    attr_cmd->add_flag("--no-recompute", opt.no_recompute, "fail instead of recomputing missing outputs");

    auto* sweep_cmd = app.add_subcommand("sweep", "reconstruction error as the learning rate shrinks");
    sweep_cmd->add_option("--config", opt.config, "experiment config (JSON)")->required();
    sweep_cmd->add_option("--epsilons", opt.epsilons, "comma-separated learning rates")->required();
    sweep_cmd->add_option("--out", opt.out, "output directory");

    auto* check_cmd = app.add_subcommand("check", "replay, PSD and consistency checks on a trajectory");
    check_cmd->add_option("--trajectory", opt.trajectory, "trajectory file")->required();
    check_cmd->add_option("--out", opt.out, "output directory");
    check_cmd->add_flag("--no-recompute", opt.no_recompute, "fail instead of recomputing missing outputs");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    }

    try {
        if (*train_cmd) return cmd_train(opt, out);
        if (*rec_cmd) return cmd_reconstruct(opt, out);
        if (*attr_cmd) return cmd_attribute(opt, out);
        if (*sweep_cmd) return cmd_sweep(opt, out);
        if (*check_cmd) return cmd_check(opt, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const DimensionError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const DivergenceError& e) {
        err << "diverged: " << e.what() << "\n";
        return kDiverged;
    } catch (const FormatError& e) {
        err << "trajectory file error: " << e.what() << " (byte offset " << e.byte_offset() << ")\n";
        return kFormatError;
    } catch (const InsufficientDataError& e) {
        err << "insufficient data: " << e.what() << "\n";
        return kInsufficientData;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kCheckFailed;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kCheckFailed;
    }
    return kConfigError;
}

}  // namespace pathkernel::cli
