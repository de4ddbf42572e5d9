#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pathkernel/flow.hpp"
#include "pathkernel/loss.hpp"
#include "pathkernel/model.hpp"

namespace pathkernel {

/// Everything needed to reproduce a run. See README for the JSON schema.
struct ExperimentConfig {
    ModelSpec model;
    LossSpec loss;
    RegularizerSpec reg;
    std::vector<DataPoint> data;
    TrainConfig train;
    InitScheme init = InitScheme::UniformScaled;
    std::vector<Vector> queries;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = ".";
    /// FNV-1a over the normalized config and the resolved data and queries.
    std::uint64_t hash = 0;
};

/// Parses a config document. Relative CSV paths resolve against `base_dir`.
/// Throws ConfigError naming the line (syntax) or field (schema) at fault.
[[nodiscard]] ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = ".");
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);

/// Header `x0..x{n-1},y`, one point per row; ids are 0-based row numbers.
[[nodiscard]] std::vector<DataPoint> read_dataset_csv(const std::filesystem::path& path);
/// Header `x0..x{n-1}`.
[[nodiscard]] std::vector<Vector> read_queries_csv(const std::filesystem::path& path);

/// Strict comma-separated float list ("0.5,-1"); whitespace around items is allowed.
[[nodiscard]] Vector parse_float_list(std::string_view text);
[[nodiscard]] double parse_float(std::string_view text);

[[nodiscard]] std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull);
[[nodiscard]] std::string hex64(std::uint64_t v);

}  // namespace pathkernel
