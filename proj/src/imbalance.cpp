#include "relia/imbalance.hpp"

#include "relia/error.hpp"
#include "relia/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace relia {

ImbalanceMethod parse_imbalance_method(const std::string& name)
{
    if (name == "none")
        return ImbalanceMethod::none;
    if (name == "smote")
        return ImbalanceMethod::smote;
    if (name == "random-over")
        return ImbalanceMethod::random_over;
    if (name == "random-under")
        return ImbalanceMethod::random_under;
    if (name == "near-miss")
        return ImbalanceMethod::near_miss;
    if (name == "reweight")
        return ImbalanceMethod::reweight;
    throw ValidationError("unknown imbalance method '" + name + "'");
}

std::string to_string(ImbalanceMethod method)
{
    switch (method) {
    case ImbalanceMethod::none: return "none";
    case ImbalanceMethod::smote: return "smote";
    case ImbalanceMethod::random_over: return "random-over";
    case ImbalanceMethod::random_under: return "random-under";
    case ImbalanceMethod::near_miss: return "near-miss";
    case ImbalanceMethod::reweight: return "reweight";
    }
    return "unknown";
}

std::size_t RebalancedSet::count(int label) const
{
    return static_cast<std::size_t>(std::count_if(
        samples.begin(), samples.end(), [label](const WeightedSample& s) { return s.label == label; }));
}

std::size_t RebalancedSet::synthetic_count() const
{
    return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(),
                                                  [](const WeightedSample& s) { return s.synthetic; }));
}

namespace {

struct ClassSplit {
    std::vector<std::size_t> minority;
    std::vector<std::size_t> majority;
    int minority_label = 1;
};

// Positives are the minority on a tie; callers treat equal counts as balanced.
ClassSplit split_classes(const LabeledSet& set, const char* method)
{
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < set.samples.size(); ++i)
        (set.samples[i].label == 1 ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty())
        throw ValidationError(std::string(method) + " needs both classes, got " +
                              std::to_string(pos.size()) + " positive and " +
                              std::to_string(neg.size()) + " negative samples");
    if (pos.size() <= neg.size())
        return {std::move(pos), std::move(neg), 1};
    return {std::move(neg), std::move(pos), 0};
}

WeightedSample real_row(const LabeledSet& set, std::size_t i)
{
    WeightedSample w;
    w.coords = set.samples[i].level.coords;
    w.label = set.samples[i].label;
    w.parent = i;
    return w;
}

RebalancedSet copy_rows(const LabeledSet& set, std::string method)
{
    RebalancedSet out;
    out.method = std::move(method);
    out.samples.reserve(set.samples.size());
    for (std::size_t i = 0; i < set.samples.size(); ++i)
        out.samples.push_back(real_row(set, i));
    return out;
}

double distance(const std::vector<double>& a, const std::vector<double>& b)
{
    double sq = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double d = a[j] - b[j];
        sq += d * d;
    }
    return std::sqrt(sq);
}

// Indices (into `pool`) of the k points of `pool` nearest to `query`,
// excluding `skip`; ties resolve to the lower pool index.
std::vector<std::size_t> nearest(const std::vector<std::vector<double>>& pool,
                                 const std::vector<double>& query, std::size_t k,
                                 std::optional<std::size_t> skip)
{
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (!skip || *skip != i)
            dist.emplace_back(distance(pool[i], query), i);
    k = std::min(k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i)
        out[i] = dist[i].second;
    return out;
}

} // namespace

RebalancedSet as_is(const LabeledSet& set)
{
    return copy_rows(set, "none");
}

RebalancedSet smote(const LabeledSet& set, const SearchSpace& space, const ImbalanceOptions& opt)
{
    if (opt.smote_k < 1)
        throw ValidationError("SMOTE k must be positive");
    const auto split = split_classes(set, "smote");
    RebalancedSet out = copy_rows(set, "smote");
    out.seed = opt.seed;
    const std::size_t m = split.minority.size();
    const std::size_t need = split.majority.size() - m;
    if (need == 0) {
        out.parameters = "k=" + std::to_string(opt.smote_k);
        return out;
    }
    if (m < 2)
        throw ValidationError("SMOTE needs at least 2 minority samples, got " + std::to_string(m) +
                              "; use random-over for this set");
    const std::size_t k = std::min(opt.smote_k, m - 1);
    out.parameters = "k=" + std::to_string(k);

    std::vector<std::vector<double>> unit(m);
    for (std::size_t i = 0; i < m; ++i)
        unit[i] = space.normalize(set.samples[split.minority[i]].level);
    std::vector<std::vector<std::size_t>> neighbors(m);
    for (std::size_t i = 0; i < m; ++i)
        neighbors[i] = nearest(unit, unit[i], k, i);

    Rng rng(opt.seed);
    for (std::size_t n = 0; n < need; ++n) {
        const std::size_t base = rng.index(m);
        const std::size_t nb = neighbors[base][rng.index(k)];
        const double gap = opt.smote_gap ? *opt.smote_gap : rng.uniform();
        const auto& x = set.samples[split.minority[base]].level.coords;
        const auto& y = set.samples[split.minority[nb]].level.coords;
        WeightedSample s;
        s.coords.resize(x.size());
        for (std::size_t j = 0; j < x.size(); ++j)
            s.coords[j] = x[j] + gap * (y[j] - x[j]);
        s.label = split.minority_label;
        s.synthetic = true;
        s.parent = split.minority[base];
        s.neighbor = split.minority[nb];
        out.samples.push_back(std::move(s));
    }
    return out;
}

RebalancedSet random_over(const LabeledSet& set, std::uint64_t seed)
{
    const auto split = split_classes(set, "random-over");
    RebalancedSet out = copy_rows(set, "random-over");
    out.seed = seed;
    Rng rng(seed);
    const std::size_t need = split.majority.size() - split.minority.size();
    for (std::size_t n = 0; n < need; ++n) {
        const std::size_t src = split.minority[rng.index(split.minority.size())];
        WeightedSample s = real_row(set, src);
        s.synthetic = true;
        out.samples.push_back(std::move(s));
    }
    return out;
}

RebalancedSet random_under(const LabeledSet& set, std::uint64_t seed)
{
    const auto split = split_classes(set, "random-under");
    RebalancedSet out;
    out.method = "random-under";
    out.seed = seed;

    // Partial Fisher-Yates over the majority rows.
    std::vector<std::size_t> pool = split.majority;
    Rng rng(seed);
    const std::size_t keep = split.minority.size();
    for (std::size_t i = 0; i < keep; ++i)
        std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
    std::vector<char> kept(set.samples.size(), 0);
    for (std::size_t i = 0; i < keep; ++i)
        kept[pool[i]] = 1;
    for (std::size_t i : split.minority)
        kept[i] = 1;
    for (std::size_t i = 0; i < set.samples.size(); ++i)
        if (kept[i])
            out.samples.push_back(real_row(set, i));
    return out;
}

RebalancedSet near_miss(const LabeledSet& set, const SearchSpace& space, std::size_t k)
{
    if (k < 1)
        throw ValidationError("NearMiss k must be positive");
    const auto split = split_classes(set, "near-miss");
    const std::size_t keep = split.minority.size();
    const std::size_t kk = std::min(k, keep);

    std::vector<std::vector<double>> minority_unit(keep);
    for (std::size_t i = 0; i < keep; ++i)
        minority_unit[i] = space.normalize(set.samples[split.minority[i]].level);

    std::vector<std::pair<double, std::size_t>> ranked;
    ranked.reserve(split.majority.size());
    for (std::size_t idx : split.majority) {
        const auto u = space.normalize(set.samples[idx].level);
        std::vector<double> d(keep);
        for (std::size_t i = 0; i < keep; ++i)
            d[i] = distance(u, minority_unit[i]);
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
        const double mean = std::accumulate(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), 0.0) /
                            static_cast<double>(kk);
        ranked.emplace_back(mean, idx);
    }
    std::sort(ranked.begin(), ranked.end());

    std::vector<char> kept(set.samples.size(), 0);
    for (std::size_t i = 0; i < keep; ++i)
        kept[ranked[i].second] = 1;
    for (std::size_t i : split.minority)
        kept[i] = 1;
    RebalancedSet out;
    out.method = "near-miss";
    out.parameters = "k=" + std::to_string(kk);
    for (std::size_t i = 0; i < set.samples.size(); ++i)
        if (kept[i])
            out.samples.push_back(real_row(set, i));
    return out;
}

RebalancedSet cost_sensitive_weights(const LabeledSet& set)
{
    const auto split = split_classes(set, "reweight");
    RebalancedSet out = copy_rows(set, "reweight");
    const auto total = static_cast<double>(set.samples.size());
    const double w_min = total / (2.0 * static_cast<double>(split.minority.size()));
    const double w_maj = total / (2.0 * static_cast<double>(split.majority.size()));
    for (auto& s : out.samples)
        s.weight = s.label == split.minority_label ? w_min : w_maj;
    return out;
}

RebalancedSet rebalance(const LabeledSet& set, const SearchSpace& space, ImbalanceMethod method,
                        const ImbalanceOptions& opt)
{
    switch (method) {
    case ImbalanceMethod::none: return as_is(set);
    case ImbalanceMethod::smote: return smote(set, space, opt);
    case ImbalanceMethod::random_over: return random_over(set, opt.seed);
    case ImbalanceMethod::random_under: return random_under(set, opt.seed);
    case ImbalanceMethod::near_miss: return near_miss(set, space, opt.near_miss_k);
    case ImbalanceMethod::reweight: return cost_sensitive_weights(set);
    }
    throw ValidationError("unknown imbalance method");
}

} // namespace relia
