#include "relia/sampler.hpp"

#include "relia/error.hpp"
#include "relia/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace relia {

int label_accuracy(double accuracy, double threshold)
{
    if (!(accuracy >= 0.0 && accuracy <= 1.0))
        throw ValidationError("accuracy " + std::to_string(accuracy) + " outside [0,1]");
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw ValidationError("threshold " + std::to_string(threshold) + " outside [0,1]");
    return accuracy >= threshold ? 1 : 0;
}

std::size_t LabeledSet::positive_count() const
{
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [](const Sample& s) { return s.label == 1; }));
}

LabeledSet LabeledSet::relabeled(double h) const
{
    LabeledSet out = *this;
    out.threshold = h;
    for (auto& s : out.samples)
        s.label = label_accuracy(s.accuracy, h);
    return out;
}

void LabeledSet::check() const
{
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].label != label_accuracy(samples[i].accuracy, threshold))
            throw ValidationError("sample " + std::to_string(i) +
                                  " has a label inconsistent with its accuracy");
}

MinorityDirection parse_direction(const std::string& name)
{
    if (name == "above")
        return MinorityDirection::above;
    if (name == "below")
        return MinorityDirection::below;
    throw ValidationError("minority direction must be 'above' or 'below', got '" + name + "'");
}

std::string to_string(MinorityDirection direction)
{
    return direction == MinorityDirection::above ? "above" : "below";
}

void SamplerConfig::validate() const
{
    if (budget < 1)
        throw ValidationError("budget must be positive");
    if (init_count < 1)
        throw ValidationError("init_count must be positive");
    if (init_count >= budget)
        throw ValidationError("init_count (" + std::to_string(init_count) +
                              ") must be smaller than budget (" + std::to_string(budget) + ")");
    if (!(delta > 0.0 && delta < 1.0))
        throw ValidationError("delta must lie in (0,1)");
    if (candidates < 1)
        throw ValidationError("candidates must be positive");
}

double beta_coefficient(std::size_t t, std::size_t d, double delta)
{
    if (t < 1 || d < 1)
        throw ValidationError("beta needs t >= 1 and d >= 1");
    if (!(delta > 0.0 && delta < 1.0))
        throw ValidationError("delta must lie in (0,1)");
    const double pi2 = std::numbers::pi * std::numbers::pi;
    return 2.0 * (std::log(static_cast<double>(d) * static_cast<double>(t) * pi2) -
                  std::log(6.0 * delta));
}

double acquisition_value(double mean, double variance, double h, double beta,
                         MinorityDirection direction)
{
    const double margin = direction == MinorityDirection::above ? mean - h : h - mean;
    return beta * std::sqrt(std::max(variance, 0.0)) + margin;
}

double acquisition(const gp::GpPosterior& gp, std::span<const double> unit_point, double h,
                   double beta, MinorityDirection direction)
{
    if (!(beta >= 0.0))
        throw ValidationError("beta must be non-negative");
    const auto p = gp.predict(unit_point);
    return acquisition_value(p.mean, p.variance, h, beta, direction);
}

namespace {

Eigen::VectorXd score(const gp::GpPosterior& gp, const Eigen::MatrixXd& probes, double h, double beta,
                      MinorityDirection direction)
{
    Eigen::VectorXd mean, variance;
    gp.predict_batch(probes, mean, variance);
    Eigen::VectorXd q(probes.rows());
    for (Eigen::Index i = 0; i < q.size(); ++i)
        q[i] = acquisition_value(mean[i], variance[i], h, beta, direction);
    return q;
}

bool collides(const Eigen::MatrixXd& inputs, const Eigen::RowVectorXd& x)
{
    for (Eigen::Index i = 0; i < inputs.rows(); ++i)
        if ((inputs.row(i) - x).cwiseAbs().maxCoeff() <= 1e-9)
            return true;
    return false;
}

} // namespace

DistortionLevel suggest_next(const gp::GpPosterior& gp, const SearchSpace& space, double h,
                             double beta, const SamplerConfig& cfg, Rng& rng)
{
    const auto d = static_cast<Eigen::Index>(space.dim());
    if (static_cast<std::size_t>(d) != gp.dim())
        throw ValidationError("posterior dimension " + std::to_string(gp.dim()) +
                              " does not match search space dimension " + std::to_string(d));
    if (!(beta >= 0.0))
        throw ValidationError("beta must be non-negative");

    Eigen::MatrixXd candidates(static_cast<Eigen::Index>(cfg.candidates), d);
    for (Eigen::Index i = 0; i < candidates.rows(); ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            candidates(i, j) = rng.uniform();
    const Eigen::VectorXd q = score(gp, candidates, h, beta, cfg.direction);
    Eigen::Index best_index = 0;
    q.maxCoeff(&best_index);
    Eigen::RowVectorXd x = candidates.row(best_index);
    double best_q = q[best_index];

    double step = 0.05;
    Eigen::MatrixXd probes(2 * d, d);
    for (std::size_t s = 0; s < cfg.refine_steps; ++s) {
        for (Eigen::Index j = 0; j < d; ++j) {
            probes.row(2 * j) = x;
            probes.row(2 * j + 1) = x;
            probes(2 * j, j) = std::min(1.0, x[j] + step);
            probes(2 * j + 1, j) = std::max(0.0, x[j] - step);
        }
        const Eigen::VectorXd pq = score(gp, probes, h, beta, cfg.direction);
        Eigen::Index move = 0;
        if (pq.maxCoeff(&move) > best_q) {
            best_q = pq[move];
            x = probes.row(move);
        }
        step *= 0.5;
    }

    for (int attempt = 0; collides(gp.inputs(), x); ++attempt) {
        if (attempt == 1000)
            throw NumericalError("could not move the suggestion off existing inputs");
        for (Eigen::Index j = 0; j < d; ++j)
            x[j] = std::clamp(x[j] + rng.uniform(-0.005, 0.005), 0.0, 1.0);
    }
    return space.denormalize(std::vector<double>(x.data(), x.data() + d));
}

namespace {

void check_run_inputs(const Oracle& oracle, const SearchSpace& space, double h)
{
    if (!(h >= 0.0 && h <= 1.0))
        throw ValidationError("threshold h must lie in [0,1]");
    if (!(oracle.space() == space))
        throw ValidationError("oracle is defined on a different search space");
}

DistortionLevel uniform_level(const SearchSpace& space, Rng& rng)
{
    std::vector<double> u(space.dim());
    for (auto& v : u)
        v = rng.uniform();
    return space.denormalize(u);
}

Sample observe(const Oracle& oracle, DistortionLevel level, double h)
{
    const double accuracy = oracle.evaluate(level);
    return Sample{std::move(level), accuracy, label_accuracy(accuracy, h)};
}

} // namespace

LabeledSet run_gp_sampling(const Oracle& oracle, const SearchSpace& space, double h,
                           const SamplerConfig& cfg)
{
    cfg.validate();
    check_run_inputs(oracle, space, h);
    const auto d = static_cast<Eigen::Index>(space.dim());

    Rng rng(cfg.seed);
    LabeledSet out;
    out.threshold = h;
    out.samples.reserve(cfg.budget);

    Eigen::MatrixXd inputs(static_cast<Eigen::Index>(cfg.budget), d);
    Eigen::VectorXd targets(static_cast<Eigen::Index>(cfg.budget));
    auto record = [&](Sample s) {
        const auto row = static_cast<Eigen::Index>(out.samples.size());
        const auto unit = space.normalize(s.level);
        for (Eigen::Index j = 0; j < d; ++j)
            inputs(row, j) = unit[static_cast<std::size_t>(j)];
        targets[row] = s.accuracy;
        out.samples.push_back(std::move(s));
    };

    for (std::size_t i = 0; i < cfg.init_count; ++i)
        record(observe(oracle, uniform_level(space, rng), h));

    for (std::size_t t = cfg.init_count; t < cfg.budget; ++t) {
        const auto n = static_cast<Eigen::Index>(t);
        Eigen::MatrixXd x = inputs.topRows(n);
        Eigen::VectorXd y = targets.head(n);
        auto kernel = gp::heuristic_kernel(x, y);
        const auto posterior = gp::GpPosterior::fit(std::move(x), std::move(y), std::move(kernel));
        const double beta = beta_coefficient(t, space.dim(), cfg.delta);
        record(observe(oracle, suggest_next(posterior, space, h, beta, cfg, rng), h));
    }
    return out;
}

LabeledSet run_random_sampling(const Oracle& oracle, const SearchSpace& space, double h,
                               std::size_t budget, std::uint64_t seed)
{
    check_run_inputs(oracle, space, h);
    Rng rng(seed);
    LabeledSet out;
    out.threshold = h;
    out.samples.reserve(budget);
    for (std::size_t i = 0; i < budget; ++i)
        out.samples.push_back(observe(oracle, uniform_level(space, rng), h));
    return out;
}

} // namespace relia
