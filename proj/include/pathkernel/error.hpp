#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pathkernel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Feature or parameter vector length does not match the model.
class DimensionError : public Error {
  public:
    DimensionError(std::string what, int layer)
        : Error(std::move(what)), layer_(layer) {}

    /// Offending layer index, or -1 when the mismatch is not tied to a layer.
    [[nodiscard]] int layer() const noexcept { return layer_; }

  private:
    int layer_;
};

/// Invalid model, loss, training or experiment configuration.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Trajectory file is truncated, corrupted or of an unsupported version.
class FormatError : public Error {
  public:
    FormatError(std::string what, std::uint64_t offset)
        : Error(std::move(what)), offset_(offset) {}

    [[nodiscard]] std::uint64_t byte_offset() const noexcept { return offset_; }

  private:
    std::uint64_t offset_;
};

/// Not enough usable data points (e.g. too few surviving sweep epsilons).
class InsufficientDataError : public Error {
  public:
    using Error::Error;
};

}  // namespace pathkernel
