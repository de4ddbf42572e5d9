#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pathkernel/flow.hpp"
#include "pathkernel/model.hpp"

namespace pathkernel {

/// Symmetric matrix of kernel values over a point set, row-major.
struct GramMatrix {
    std::vector<std::int64_t> points;
    std::size_t size = 0;
    Vector values;

    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return values[i * size + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * size + j]; }
};

/// Relative tolerance below which |K^p(x, x_i)| counts as a zero denominator.
inline constexpr double kDenominatorTolerance = 1e-10;

/// Kernel-machine view of one prediction.
///
/// `y_hat = b − Σ_i klp[i]` is the canonical form; `a[i] * k[i]` reproduces
/// `−klp[i]` for every unflagged example.
struct Reconstruction {
    Vector query;
    double y0 = 0.0;          ///< initial model output f_{w_0}(x)
    double reg_offset = 0.0;  ///< regularizer term folded into b (0 without one)
    double b = 0.0;           ///< y0 + reg_offset
    Vector a;
    Vector k;    ///< path kernel K^p(x, x_i)
    Vector klp;  ///< loss-weighted path kernel K^lp(x, x_i)
    double k_self = 0.0;  ///< K^p(x, x)
    std::vector<bool> denominator_flags;
    double y_hat = 0.0;
    double y_net = 0.0;  ///< final network output, diagnostic only

    [[nodiscard]] std::size_t flagged_count() const;
    /// Σ over unflagged a_i·K_i plus Σ over flagged −K^lp_i, plus b.
    [[nodiscard]] double y_hat_from_weights() const;
};

struct ExampleWeights {
    Vector a;
    std::vector<bool> flags;
};

struct Attribution {
    std::size_t position = 0;  ///< row in the training set
    std::int64_t id = 0;       ///< DataPoint::index
    double contribution = 0.0;  ///< −K^lp(x, x_i)
    double a = 0.0;
    double k = 0.0;
    bool flagged = false;
};

struct AttributionReport {
    std::vector<Attribution> ranked;  ///< top_k by |contribution|, descending
    double total_contribution = 0.0;  ///< sum over all m examples
    double y_hat = 0.0;
    double b = 0.0;
};

struct KernelOptions {
    /// Recompute y_i(w_s) when the trajectory did not record them.
    bool recompute_outputs = true;
    /// Budget for caching training-point gradients (S × m × d doubles).
    /// Above it gradients are recomputed per query.
    std::size_t cache_limit_bytes = std::size_t{512} << 20;
};

/// Path-kernel computations over one immutable trajectory.
///
/// Quadrature is the left-endpoint rule: checkpoint k contributes with weight
/// Trajectory::quadrature_weight(k), matching the discrete update exactly.
/// Const member functions are safe to call concurrently.
class PathKernelEngine {
  public:
    explicit PathKernelEngine(const Trajectory& traj, KernelOptions options = {});

    [[nodiscard]] const Trajectory& trajectory() const { return traj_; }
    [[nodiscard]] bool gradients_cached() const { return !grad_cache_.empty(); }

    [[nodiscard]] double path_kernel(std::span<const double> x, std::span<const double> x_prime) const;
    [[nodiscard]] double loss_weighted_path_kernel(std::span<const double> x, std::size_t i) const;
    [[nodiscard]] ExampleWeights example_weights(std::span<const double> x) const;
    [[nodiscard]] double regularization_offset(std::span<const double> x) const;
    /// Reconstruction of the trained model's prediction at x. Reads checkpoint
    /// 0 for b and otherwise touches x only through tangent kernels; y_net is
    /// filled separately from final_output.
    [[nodiscard]] Reconstruction reconstruct(std::span<const double> x) const;
    [[nodiscard]] AttributionReport attribute(std::span<const double> x, std::size_t top_k) const;
    [[nodiscard]] GramMatrix path_gram(std::span<const Vector> points) const;
    /// f at the final checkpoint.
    [[nodiscard]] double final_output(std::span<const double> x) const;

    /// L′(y_i*, y_i(w_k)) · mask_k[i] · weight_k.
    [[nodiscard]] double loss_coefficient(std::size_t k, std::size_t i) const { return coef_[k][i]; }

  private:
    struct QueryTerms {
        Vector k;
        Vector klp;
        double k_self = 0.0;
        double reg = 0.0;
    };
    [[nodiscard]] QueryTerms accumulate(std::span<const double> x) const;
    [[nodiscard]] ParamVector training_gradient(std::size_t k, std::size_t i) const;

    const Trajectory& traj_;
    KernelOptions options_;
    std::vector<Vector> coef_;
    /// grad_cache_[k] holds m gradients of length d back to back.
    std::vector<Vector> grad_cache_;
};

[[nodiscard]] double tangent_kernel(const ModelSpec& spec, std::span<const double> w,
                                    std::span<const double> x, std::span<const double> x_prime);
[[nodiscard]] GramMatrix tangent_gram(const ModelSpec& spec, std::span<const double> w,
                                      std::span<const Vector> points);

[[nodiscard]] double path_kernel(const Trajectory& traj, std::span<const double> x,
                                 std::span<const double> x_prime);
[[nodiscard]] double loss_weighted_path_kernel(const Trajectory& traj, std::span<const double> x,
                                               std::size_t i, KernelOptions options = {});
[[nodiscard]] ExampleWeights example_weights(const Trajectory& traj, std::span<const double> x,
                                             KernelOptions options = {});
[[nodiscard]] double regularization_offset(const Trajectory& traj, std::span<const double> x);
/// Reconstruction with y_net filled in.
[[nodiscard]] Reconstruction reconstruct(const Trajectory& traj, std::span<const double> x,
                                         KernelOptions options = {});
[[nodiscard]] AttributionReport attribute(const Trajectory& traj, std::span<const double> x,
                                          std::size_t top_k, KernelOptions options = {});
[[nodiscard]] GramMatrix path_gram(const Trajectory& traj, std::span<const Vector> points);

/// Keeps every `factor`-th stored checkpoint plus the last one.
[[nodiscard]] Trajectory thin_trajectory(const Trajectory& traj, std::size_t factor);

/// |ŷ(stored checkpoints) − ŷ(every other checkpoint)| at a probe query, an
/// estimate of the quadrature error due to checkpoint spacing.
[[nodiscard]] double quadrature_error_estimate(const Trajectory& traj, std::span<const double> probe,
                                               KernelOptions options = {});

}  // namespace pathkernel
