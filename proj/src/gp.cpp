#include "relia/gp.hpp"

#include "relia/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <utility>
#include <cmath>
#include <string>

namespace relia::gp {

void KernelConfig::validate() const
{
    if (lengthscales.empty())
        throw ValidationError("kernel needs at least one lengthscale");
    for (double l : lengthscales)
        if (!(l > 0.0))
            throw ValidationError("kernel lengthscales must be positive");
    if (!(signal_variance > 0.0))
        throw ValidationError("kernel signal variance must be positive");
    if (!(jitter >= 0.0))
        throw ValidationError("kernel jitter must be non-negative");
}

double kernel_eval(std::span<const double> a, std::span<const double> b, const KernelConfig& cfg)
{
    if (a.size() != b.size() || a.size() != cfg.lengthscales.size())
        throw ValidationError("kernel dimension mismatch: " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + " (kernel has " +
                              std::to_string(cfg.lengthscales.size()) + ")");
    double sq = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double z = (a[j] - b[j]) / cfg.lengthscales[j];
        sq += z * z;
    }
    return cfg.signal_variance * std::exp(-0.5 * sq);
}

namespace {

Eigen::MatrixXd scale_rows(const Eigen::MatrixXd& rows, const std::vector<double>& lengthscales)
{
    Eigen::MatrixXd out = rows;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        out.col(j) /= lengthscales[static_cast<std::size_t>(j)];
    return out;
}

// Cross-covariance between scaled rows of `a` (t x d) and `b` (m x d), t x m.
Eigen::MatrixXd cross_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double variance)
{
    Eigen::MatrixXd out(a.rows(), b.rows());
    Eigen::ArrayXd sq(a.rows());
    for (Eigen::Index q = 0; q < b.rows(); ++q) {
        sq.setZero();
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            sq += (a.col(j).array() - b(q, j)).square();
        out.col(q) = variance * (-0.5 * sq).exp();
    }
    return out;
}

// Number of pairs i < j in `sorted` with sorted[j] - sorted[i] <= x.
std::size_t pairs_within(const std::vector<double>& sorted, double x)
{
    std::size_t count = 0;
    std::size_t lo = 0;
    for (std::size_t hi = 1; hi < sorted.size(); ++hi) {
        while (sorted[hi] - sorted[lo] > x)
            ++lo;
        count += hi - lo;
    }
    return count;
}

// k-th smallest (1-based) pairwise absolute difference. Bisects over the bit
// patterns of non-negative doubles, which order like the values, so the
// result is exactly one of the differences.
double kth_pairwise_difference(const std::vector<double>& sorted, std::size_t k)
{
    std::uint64_t lo = 0;
    std::uint64_t hi = std::bit_cast<std::uint64_t>(sorted.back() - sorted.front());
    while (lo < hi) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        if (pairs_within(sorted, std::bit_cast<double>(mid)) >= k)
            hi = mid;
        else
            lo = mid + 1;
    }
    return std::bit_cast<double>(lo);
}

// First pair of rows that agree in every coordinate within `tol`.
std::optional<std::pair<Eigen::Index, Eigen::Index>> find_duplicate(const Eigen::MatrixXd& rows,
                                                                    double tol)
{
    const Eigen::MatrixXd rm = rows.transpose(); // one observation per column
    const Eigen::Index d = rm.rows();
    for (Eigen::Index i = 0; i < rm.cols(); ++i) {
        const double* a = rm.col(i).data();
        for (Eigen::Index k = i + 1; k < rm.cols(); ++k) {
            const double* b = rm.col(k).data();
            Eigen::Index j = 0;
            while (j < d && std::abs(a[j] - b[j]) <= tol)
                ++j;
            if (j == d)
                return std::pair{i, k};
        }
    }
    return std::nullopt;
}

} // namespace

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& inputs, const KernelConfig& cfg)
{
    cfg.validate();
    if (static_cast<std::size_t>(inputs.cols()) != cfg.lengthscales.size())
        throw ValidationError("kernel dimension mismatch: inputs have " +
                              std::to_string(inputs.cols()) + " columns, kernel has " +
                              std::to_string(cfg.lengthscales.size()));
    const Eigen::MatrixXd scaled = scale_rows(inputs, cfg.lengthscales);
    return cross_kernel(scaled, scaled, cfg.signal_variance);
}

GpPosterior GpPosterior::fit(Eigen::MatrixXd inputs, Eigen::VectorXd targets, KernelConfig cfg)
{
    cfg.validate();
    const Eigen::Index t = inputs.rows();
    if (t < 1)
        throw ValidationError("GP fit needs at least one observation");
    if (targets.size() != t)
        throw ValidationError("GP fit got " + std::to_string(t) + " inputs but " +
                              std::to_string(targets.size()) + " targets");
    if (static_cast<std::size_t>(inputs.cols()) != cfg.lengthscales.size())
        throw ValidationError("GP inputs have dimension " + std::to_string(inputs.cols()) +
                              ", kernel has " + std::to_string(cfg.lengthscales.size()));
    for (Eigen::Index i = 0; i < t; ++i)
        if (!(targets[i] >= 0.0 && targets[i] <= 1.0))
            throw ValidationError("GP target " + std::to_string(i) + " = " +
                                  std::to_string(targets[i]) + " is outside [0,1]");
    if (auto pair = find_duplicate(inputs, kDuplicateTolerance))
        throw ValidationError("GP inputs " + std::to_string(pair->first) + " and " +
                              std::to_string(pair->second) + " are duplicates");

    GpPosterior gp;
    gp.scaled_ = scale_rows(inputs, cfg.lengthscales);
    const Eigen::MatrixXd gram = cross_kernel(gp.scaled_, gp.scaled_, cfg.signal_variance);

    double jitter = cfg.jitter;
    const double ceiling = std::max(kMaxJitter, cfg.jitter);
    for (;;) {
        Eigen::MatrixXd k = gram;
        k.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(k);
        if (llt.info() == Eigen::Success) {
            gp.factor_ = llt.matrixL();
            gp.alpha_ = llt.solve(targets);
            break;
        }
        if (jitter >= ceiling)
            throw NumericalError("kernel matrix not positive definite even with jitter " +
                                 std::to_string(jitter));
        jitter = jitter > 0.0 ? std::min(jitter * 10.0, ceiling) : kMinJitter;
    }
    cfg.jitter = jitter;
    gp.inputs_ = std::move(inputs);
    gp.targets_ = std::move(targets);
    gp.kernel_ = std::move(cfg);
    return gp;
}

Prediction GpPosterior::predict(std::span<const double> c) const
{
    if (c.size() != dim())
        throw ValidationError("probe has dimension " + std::to_string(c.size()) +
                              ", posterior has " + std::to_string(dim()));
    Eigen::VectorXd kstar(inputs_.rows());
    for (Eigen::Index i = 0; i < inputs_.rows(); ++i) {
        double sq = 0.0;
        for (Eigen::Index j = 0; j < inputs_.cols(); ++j) {
            const double z = scaled_(i, j) - c[static_cast<std::size_t>(j)] /
                                                 kernel_.lengthscales[static_cast<std::size_t>(j)];
            sq += z * z;
        }
        kstar[i] = kernel_.signal_variance * std::exp(-0.5 * sq);
    }
    Prediction p;
    p.mean = kstar.dot(alpha_);
    const Eigen::VectorXd v = factor_.triangularView<Eigen::Lower>().solve(kstar);
    p.raw_variance = kernel_.signal_variance - v.squaredNorm();
    p.variance = std::max(0.0, p.raw_variance);
    return p;
}

void GpPosterior::predict_batch(const Eigen::MatrixXd& probes, Eigen::VectorXd& mean,
                                Eigen::VectorXd& variance) const
{
    if (static_cast<std::size_t>(probes.cols()) != dim())
        throw ValidationError("probes have dimension " + std::to_string(probes.cols()) +
                              ", posterior has " + std::to_string(dim()));
    Eigen::MatrixXd kstar =
        cross_kernel(scaled_, scale_rows(probes, kernel_.lengthscales), kernel_.signal_variance);
    mean = kstar.transpose() * alpha_;
    factor_.triangularView<Eigen::Lower>().solveInPlace(kstar);
    variance = (kernel_.signal_variance - kstar.colwise().squaredNorm().array())
                   .max(0.0)
                   .matrix()
                   .transpose();
}

std::vector<double> median_heuristic_lengthscales(const Eigen::MatrixXd& points)
{
    const Eigen::Index n = points.rows();
    if (n < 2)
        throw ValidationError("median heuristic needs at least two points");
    const auto pairs = static_cast<std::size_t>(n * (n - 1) / 2);
    std::vector<double> out(static_cast<std::size_t>(points.cols()));
    std::vector<double> column(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
        for (Eigen::Index i = 0; i < n; ++i)
            column[static_cast<std::size_t>(i)] = points(i, j);
        std::sort(column.begin(), column.end());
        // Mean of the two central order statistics for an even pair count.
        double median = kth_pairwise_difference(column, pairs / 2 + 1);
        if (pairs % 2 == 0)
            median = 0.5 * (median + kth_pairwise_difference(column, pairs / 2));
        out[static_cast<std::size_t>(j)] = std::max(median, kLengthscaleFloor);
    }
    return out;
}

KernelConfig heuristic_kernel(const Eigen::MatrixXd& points, const Eigen::VectorXd& targets)
{
    KernelConfig cfg;
    if (points.rows() >= 2)
        cfg.lengthscales = median_heuristic_lengthscales(points);
    else
        cfg.lengthscales.assign(static_cast<std::size_t>(points.cols()), 1.0);
    double variance = 0.0;
    if (targets.size() >= 2) {
        const double mean = targets.mean();
        variance = (targets.array() - mean).square().sum() / static_cast<double>(targets.size() - 1);
    }
    cfg.signal_variance = std::max(variance, kSignalVarianceFloor);
    cfg.jitter = kMinJitter;
    return cfg;
}

} // namespace relia::gp
