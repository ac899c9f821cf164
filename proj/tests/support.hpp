#pragma once

#include "relia/sampler.hpp"
#include "relia/space.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace support {

// Gaussian elimination with partial pivoting; independent of Eigen.
inline std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b)
{
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col]))
                pivot = r;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c)
                a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c)
            s -= a[i][c] * x[c];
        x[i] = s / a[i][i];
    }
    return x;
}

inline double se_kernel(const std::vector<double>& a, const std::vector<double>& b,
                        const std::vector<double>& ls, double sv)
{
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double z = (a[j] - b[j]) / ls[j];
        s += z * z;
    }
    return sv * std::exp(-0.5 * s);
}

// Posterior mean and variance by direct solves of (K + jitter I).
inline std::pair<double, double> dense_posterior(const std::vector<std::vector<double>>& x,
                                                 const std::vector<double>& y,
                                                 const std::vector<double>& probe,
                                                 const std::vector<double>& ls, double sv,
                                                 double jitter)
{
    const std::size_t n = x.size();
    std::vector<std::vector<double>> k(n, std::vector<double>(n));
    std::vector<double> ks(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            k[i][j] = se_kernel(x[i], x[j], ls, sv) + (i == j ? jitter : 0.0);
        ks[i] = se_kernel(x[i], probe, ls, sv);
    }
    const auto alpha = dense_solve(k, y);
    const auto v = dense_solve(k, ks);
    double mean = 0.0, reduction = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean += ks[i] * alpha[i];
        reduction += ks[i] * v[i];
    }
    return {mean, sv - reduction};
}

inline relia::SearchSpace unit_space(std::size_t d)
{
    std::vector<relia::Dimension> dims;
    for (std::size_t j = 0; j < d; ++j)
        dims.push_back({"x" + std::to_string(j), 0.0, 1.0});
    return relia::SearchSpace(std::move(dims));
}

// Labels are carried by accuracies 1.0 / 0.0 at threshold 0.5.
inline relia::LabeledSet make_set(const std::vector<std::vector<double>>& points,
                                  const std::vector<int>& labels)
{
    relia::LabeledSet set;
    set.threshold = 0.5;
    for (std::size_t i = 0; i < points.size(); ++i)
        set.samples.push_back({relia::DistortionLevel{points[i]}, labels[i] ? 1.0 : 0.0, labels[i]});
    return set;
}

inline std::vector<std::vector<double>> random_points(std::size_t n, std::size_t d,
                                                      std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> out(n, std::vector<double>(d));
    for (auto& p : out)
        for (auto& v : p)
            v = u(gen);
    return out;
}

inline std::filesystem::path scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("relia_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace support
