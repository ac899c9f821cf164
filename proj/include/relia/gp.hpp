#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

namespace relia::gp {

/// Squared-exponential kernel settings.
struct KernelConfig {
    std::vector<double> lengthscales;
    double signal_variance = 1.0;
    /// Starting diagonal jitter; fit() escalates it on factorization failure.
    double jitter = 1e-10;

    /// Throws ValidationError on non-positive lengthscales/variance or
    /// negative jitter.
    void validate() const;
};

inline constexpr double kMinJitter = 1e-10;
inline constexpr double kMaxJitter = 1e-4;
inline constexpr double kLengthscaleFloor = 1e-3;
inline constexpr double kSignalVarianceFloor = 1e-4;
inline constexpr double kDuplicateTolerance = 1e-12;

/// signal_variance * exp(-0.5 * sum_j ((a_j - b_j) / l_j)^2)
double kernel_eval(std::span<const double> a, std::span<const double> b, const KernelConfig& cfg);

struct Prediction {
    double mean = 0.0;
    /// Clamped at zero.
    double variance = 0.0;
    /// Value before clamping, exposed for numerical audits.
    double raw_variance = 0.0;
};

/// Zero-mean GP regression posterior over inputs already mapped to the unit
/// cube. Immutable after fit(); concurrent predict() calls are safe.
class GpPosterior {
public:
    /// `inputs` holds one observation per row. Throws ValidationError for
    /// empty/mismatched inputs, targets outside [0,1] or duplicate rows, and
    /// NumericalError when the kernel matrix cannot be factorized even with
    /// jitter kMaxJitter.
    static GpPosterior fit(Eigen::MatrixXd inputs, Eigen::VectorXd targets, KernelConfig cfg);

    Prediction predict(std::span<const double> c) const;
    /// Batched prediction; `probes` holds one query per row.
    void predict_batch(const Eigen::MatrixXd& probes, Eigen::VectorXd& mean,
                       Eigen::VectorXd& variance) const;

    std::size_t size() const { return static_cast<std::size_t>(inputs_.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(inputs_.cols()); }
    const Eigen::MatrixXd& inputs() const { return inputs_; }
    const Eigen::VectorXd& targets() const { return targets_; }
    /// Kernel with the jitter that was actually used.
    const KernelConfig& kernel() const { return kernel_; }
    /// Lower-triangular L with L * L^T = K + jitter * I.
    const Eigen::MatrixXd& factor() const { return factor_; }
    /// (K + jitter * I)^-1 * targets.
    const Eigen::VectorXd& alpha() const { return alpha_; }

private:
    GpPosterior() = default;

    Eigen::MatrixXd inputs_;
    Eigen::MatrixXd scaled_; // inputs divided by lengthscales
    Eigen::VectorXd targets_;
    KernelConfig kernel_;
    Eigen::MatrixXd factor_;
    Eigen::VectorXd alpha_;
};

/// Kernel matrix K (without jitter) for the given rows.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& inputs, const KernelConfig& cfg);

/// Per dimension: median of pairwise absolute coordinate differences,
/// floored at kLengthscaleFloor. Needs at least two points.
std::vector<double> median_heuristic_lengthscales(const Eigen::MatrixXd& points);

/// Hyperparameters refreshed at every refit: median-heuristic lengthscales
/// and the sample variance of the targets (floored at kSignalVarianceFloor).
/// A single point gets unit lengthscales.
KernelConfig heuristic_kernel(const Eigen::MatrixXd& points, const Eigen::VectorXd& targets);

} // namespace relia::gp
