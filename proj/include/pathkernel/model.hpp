#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace pathkernel {

using Vector = std::vector<double>;
/// Flat parameter vector. Layout is layer-major, weights before biases,
/// weight matrices row-major as (fan_out x fan_in).
using ParamVector = std::vector<double>;

enum class ModelKind : std::uint8_t { Linear = 0, MLP = 1 };
enum class Activation : std::uint8_t { Tanh = 0, ReLU = 1, Sigmoid = 2, Identity = 3 };

/// Architecture of a scalar-output model f_w(x).
///
/// Linear models compute w . x (+ b). MLPs apply `activation` after every
/// hidden layer and `output_activation` after the final (width 1) layer.
struct ModelSpec {
    ModelKind kind = ModelKind::Linear;
    /// MLP: input dim first, 1 last. Linear: single entry, the input dim.
    std::vector<std::size_t> layer_sizes;
    Activation activation = Activation::Tanh;
    Activation output_activation = Activation::Identity;
    /// One flag per weight layer (a Linear model has one layer).
    std::vector<bool> bias;

    static ModelSpec linear(std::size_t input_dim, bool with_bias = false);
    static ModelSpec mlp(std::vector<std::size_t> sizes, Activation act,
                         Activation output_act = Activation::Identity);

    [[nodiscard]] std::size_t input_dim() const;
    [[nodiscard]] std::size_t num_layers() const;
    [[nodiscard]] std::size_t fan_in(std::size_t layer) const;
    [[nodiscard]] std::size_t fan_out(std::size_t layer) const;
    /// Offset of layer `layer`'s weight block within the parameter vector.
    [[nodiscard]] std::size_t layer_offset(std::size_t layer) const;

    /// Throws ConfigError when the architecture is malformed.
    void validate() const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct DataPoint {
    Vector x;
    double y_star = 0.0;
    std::int64_t index = 0;
};

enum class InitScheme : std::uint8_t { Zero, UniformScaled };

[[nodiscard]] std::size_t param_count(const ModelSpec& spec);

/// f_w(x).
[[nodiscard]] double eval(const ModelSpec& spec, std::span<const double> w,
                          std::span<const double> x);

/// Output and exact reverse-mode gradient in one pass.
struct EvalGrad {
    double value = 0.0;
    ParamVector grad;
};
[[nodiscard]] EvalGrad eval_and_grad(const ModelSpec& spec, std::span<const double> w,
                                     std::span<const double> x);

/// ∇_w f_w(x).
[[nodiscard]] ParamVector grad_params(const ModelSpec& spec, std::span<const double> w,
                                      std::span<const double> x);

[[nodiscard]] ParamVector init_params(const ModelSpec& spec, InitScheme scheme,
                                      std::uint64_t seed);

/// Throws DimensionError / ConfigError when `w` does not fit `spec` or is non-finite.
void check_params(const ModelSpec& spec, std::span<const double> w);
/// Throws DimensionError when any point's feature length is wrong.
void check_data(const ModelSpec& spec, std::span<const DataPoint> data);

[[nodiscard]] double activate(Activation act, double z);
[[nodiscard]] double activate_derivative(Activation act, double z);

[[nodiscard]] std::string_view to_string(Activation act);
[[nodiscard]] std::string_view to_string(ModelKind kind);

}  // namespace pathkernel
