#include "pathkernel/loss.hpp"

#include <algorithm>
#include <cmath>

#include "pathkernel/error.hpp"

namespace pathkernel {

void RegularizerSpec::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("regularizer lambda must be >= 0");
}

double loss_value(const LossSpec& spec, double y_star, double y) {
    switch (spec.kind) {
        case LossKind::HalfSquaredError: {
            const double r = y - y_star;
            return 0.5 * r * r;
        }
        case LossKind::CrossEntropyProb: return -std::log(std::max(y, kProbabilityFloor));
    }
    return 0.0;
}

double loss_derivative(const LossSpec& spec, double y_star, double y) {
    switch (spec.kind) {
        case LossKind::HalfSquaredError: return y - y_star;
        case LossKind::CrossEntropyProb: return -1.0 / std::max(y, kProbabilityFloor);
    }
    return 0.0;
}

bool hits_probability_floor(const LossSpec& spec, double y) {
    return spec.kind == LossKind::CrossEntropyProb && !(y >= kProbabilityFloor);
}

double regularizer_value(const RegularizerSpec& spec, std::span<const double> w) {
    if (spec.kind == RegularizerKind::None) return 0.0;
    double sq = 0.0;
    for (double v : w) sq += v * v;
    return spec.lambda * sq;
}

ParamVector regularizer_grad(const RegularizerSpec& spec, std::span<const double> w) {
    ParamVector g(w.size(), 0.0);
    if (spec.kind == RegularizerKind::L2) {
        const double scale = 2.0 * spec.lambda;
        for (std::size_t j = 0; j < w.size(); ++j) g[j] = scale * w[j];
    }
    return g;
}

std::string_view to_string(LossKind kind) {
    return kind == LossKind::HalfSquaredError ? "half_squared_error" : "cross_entropy_prob";
}

std::string_view to_string(RegularizerKind kind) { return kind == RegularizerKind::None ? "none" : "l2"; }

}  // namespace pathkernel
