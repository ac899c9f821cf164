#pragma once

#include "relia/gp.hpp"
#include "relia/rng.hpp"
#include "relia/space.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace relia {

class Oracle;

/// 1 when the accuracy reaches the reliability threshold (inclusive).
int label_accuracy(double accuracy, double threshold);

struct Sample {
    DistortionLevel level;
    double accuracy = 0.0;
    int label = 0;
};

/// Sampled distortion levels with their oracle accuracies and thresholded
/// labels. Keeping the accuracies lets a set be relabeled for another
/// threshold without touching the oracle.
struct LabeledSet {
    std::vector<Sample> samples;
    double threshold = 0.5;

    std::size_t size() const { return samples.size(); }
    std::size_t positive_count() const;
    /// Copy with every label recomputed for `h`.
    LabeledSet relabeled(double h) const;
    /// Throws ValidationError if any label disagrees with its accuracy.
    void check() const;
};

/// Which side of the threshold is the minority class the sampler chases.
enum class MinorityDirection { above, below };

MinorityDirection parse_direction(const std::string& name);
std::string to_string(MinorityDirection direction);

struct SamplerConfig {
    std::size_t budget = 600;
    std::size_t init_count = 20;
    double delta = 0.1;
    MinorityDirection direction = MinorityDirection::above;
    std::size_t candidates = 2048;
    std::size_t refine_steps = 32;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Exploration weight 2 * [ln(d t pi^2) - ln(6 delta)].
double beta_coefficient(std::size_t t, std::size_t d, double delta);

/// beta * sigma + (mean - h), or beta * sigma + (h - mean) when chasing the
/// below-threshold class.
double acquisition_value(double mean, double variance, double h, double beta,
                         MinorityDirection direction);

/// Acquisition at a point given in unit-cube coordinates.
double acquisition(const gp::GpPosterior& gp, std::span<const double> unit_point, double h,
                   double beta, MinorityDirection direction);

/// Maximizes the acquisition: best of cfg.candidates uniform draws, then
/// cfg.refine_steps coordinate moves whose step starts at 5% of each range
/// and halves every step. A result that collides with an existing GP input
/// is perturbed by up to 0.5% of each range.
DistortionLevel suggest_next(const gp::GpPosterior& gp, const SearchSpace& space, double h,
                             double beta, const SamplerConfig& cfg, Rng& rng);

/// GP-guided construction of the training set. The first cfg.init_count
/// levels are uniform; the rest maximize the acquisition with beta
/// recomputed at every step. Exactly cfg.budget oracle calls.
LabeledSet run_gp_sampling(const Oracle& oracle, const SearchSpace& space, double h,
                           const SamplerConfig& cfg);

/// Baseline: `budget` i.i.d. uniform levels.
LabeledSet run_random_sampling(const Oracle& oracle, const SearchSpace& space, double h,
                               std::size_t budget, std::uint64_t seed);

} // namespace relia
