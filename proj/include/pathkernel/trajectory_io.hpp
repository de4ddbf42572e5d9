#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pathkernel/flow.hpp"

namespace pathkernel {

/// Binary trajectory format, all integers and floats little-endian:
///
///   "PKTRAJ\0\n"  u32 format_version
///   u64 config_hash
///   model:  u8 kind, u8 activation, u8 output_activation,
///           u32 n, u64 layer_sizes[n], u32 nb, u8 bias[nb]
///   u8 loss_kind, u8 reg_kind, f64 lambda
///   u64 m, u64 d, u64 S, u64 stride, u64 seed
///   u8 mode, u64 batch_size, u64 minibatch_seed, f64 epsilon, u8 has_outputs
///   u64 num_checkpoints, u64 input_dim
///   m × { i64 index, f64 y_star, f64 x[input_dim] }
///   num_checkpoints × { u64 step, f64 epsilon, u8 mask[ceil(m/8)] (LSB first),
///                       f64 w[d], f64 outputs[m] if has_outputs }
///   "PKEND\0\0\0"
inline constexpr std::uint32_t kTrajectoryFormatVersion = 1;

[[nodiscard]] std::vector<std::uint8_t> encode_trajectory(const Trajectory& traj);
/// Throws FormatError with the byte offset of the first bad field.
[[nodiscard]] Trajectory decode_trajectory(std::span<const std::uint8_t> bytes);

void save_trajectory(const Trajectory& traj, const std::filesystem::path& path);
[[nodiscard]] Trajectory load_trajectory(const std::filesystem::path& path);

}  // namespace pathkernel
