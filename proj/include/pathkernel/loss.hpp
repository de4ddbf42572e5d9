#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "pathkernel/model.hpp"

namespace pathkernel {

enum class LossKind : std::uint8_t {
    HalfSquaredError = 0,  ///< ½(y − y*)², L′ = y − y*
    CrossEntropyProb = 1,  ///< −ln p with p the model output, L′ = −1/p
};

struct LossSpec {
    LossKind kind = LossKind::HalfSquaredError;
    friend bool operator==(const LossSpec&, const LossSpec&) = default;
};

enum class RegularizerKind : std::uint8_t { None = 0, L2 = 1 };

/// R(w) = lambda · ‖w‖² for L2.
struct RegularizerSpec {
    RegularizerKind kind = RegularizerKind::None;
    double lambda = 0.0;

    [[nodiscard]] bool active() const { return kind != RegularizerKind::None; }
    void validate() const;
    friend bool operator==(const RegularizerSpec&, const RegularizerSpec&) = default;
};

/// Probabilities below this are clamped before −ln p and −1/p.
inline constexpr double kProbabilityFloor = 1e-12;

[[nodiscard]] double loss_value(const LossSpec& spec, double y_star, double y);
/// ∂L/∂y.
[[nodiscard]] double loss_derivative(const LossSpec& spec, double y_star, double y);
/// True when a cross-entropy output had to be floored; the caller logs it.
[[nodiscard]] bool hits_probability_floor(const LossSpec& spec, double y);

[[nodiscard]] double regularizer_value(const RegularizerSpec& spec, std::span<const double> w);
[[nodiscard]] ParamVector regularizer_grad(const RegularizerSpec& spec, std::span<const double> w);

[[nodiscard]] std::string_view to_string(LossKind kind);
[[nodiscard]] std::string_view to_string(RegularizerKind kind);

}  // namespace pathkernel
