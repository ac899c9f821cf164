#pragma once

#include "relia/sampler.hpp"
#include "relia/space.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace relia {

enum class ImbalanceMethod { none, smote, random_over, random_under, near_miss, reweight };

ImbalanceMethod parse_imbalance_method(const std::string& name);
std::string to_string(ImbalanceMethod method);

struct WeightedSample {
    std::vector<double> coords; // raw level coordinates
    int label = 0;
    double weight = 1.0;
    bool synthetic = false;
    /// Source row in the input set: the row itself for real samples, the
    /// duplicated or interpolated-from row for synthetic ones.
    std::size_t parent = 0;
    /// SMOTE only: the neighbour the synthetic point was interpolated towards.
    std::optional<std::size_t> neighbor;
};

struct RebalancedSet {
    std::vector<WeightedSample> samples;
    std::string method;
    std::string parameters;
    std::uint64_t seed = 0;

    std::size_t count(int label) const;
    std::size_t synthetic_count() const;
};

struct ImbalanceOptions {
    std::size_t smote_k = 5;
    std::size_t near_miss_k = 3;
    std::uint64_t seed = 0;
    /// Test hook: fixes the SMOTE interpolation gap instead of drawing it.
    std::optional<double> smote_gap;
};

/// Copies the set unchanged with unit weights.
RebalancedSet as_is(const LabeledSet& set);

/// Synthesizes minority points x + gap * (neighbour - x), gap ~ U[0,1], with
/// the neighbour drawn from the k nearest minority points (Euclidean on
/// unit-cube coordinates), until both classes have the same count. k is
/// clipped to minority_count - 1. Throws ValidationError when the minority
/// class has fewer than two samples (use random_over instead).
RebalancedSet smote(const LabeledSet& set, const SearchSpace& space, const ImbalanceOptions& opt);

/// Duplicates uniformly drawn minority rows until the counts match.
RebalancedSet random_over(const LabeledSet& set, std::uint64_t seed);

/// Keeps a uniform subset of the majority class of minority size.
RebalancedSet random_under(const LabeledSet& set, std::uint64_t seed);

/// NearMiss-1: keeps the majority rows whose mean distance to their k nearest
/// minority rows is smallest (ties by row index). No randomness.
RebalancedSet near_miss(const LabeledSet& set, const SearchSpace& space, std::size_t k);

/// No resampling; each row weighs total / (2 * its class count).
RebalancedSet cost_sensitive_weights(const LabeledSet& set);

/// Dispatches to the method above.
RebalancedSet rebalance(const LabeledSet& set, const SearchSpace& space, ImbalanceMethod method,
                        const ImbalanceOptions& opt);

} // namespace relia
