#include "relia/evaluation.hpp"

#include "relia/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <thread>

namespace relia {

Metrics f1_score(std::span<const int> predictions, std::span<const int> truth)
{
    if (predictions.size() != truth.size())
        throw ValidationError("f1_score got " + std::to_string(predictions.size()) +
                              " predictions for " + std::to_string(truth.size()) + " labels");
    if (truth.empty())
        throw ValidationError("f1_score needs at least one label");
    Metrics m;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool p = predictions[i] == 1;
        const bool t = truth[i] == 1;
        if (p && t)
            ++m.true_positive;
        else if (p)
            ++m.false_positive;
        else if (t)
            ++m.false_negative;
        else
            ++m.true_negative;
    }
    const auto tp = static_cast<double>(m.true_positive);
    const double predicted = tp + static_cast<double>(m.false_positive);
    const double actual = tp + static_cast<double>(m.false_negative);
    m.precision = predicted > 0.0 ? tp / predicted : 0.0;
    m.recall = actual > 0.0 ? tp / actual : 0.0;
    const double sum = m.precision + m.recall;
    m.f1 = sum > 0.0 ? 2.0 * m.precision * m.recall / sum : 0.0;
    return m;
}

LabeledSet build_grid_test_set(const SearchSpace& space, std::size_t points_per_dim,
                               const Oracle& oracle, double h)
{
    if (points_per_dim < 2)
        throw ValidationError("points_per_dim must be at least 2");
    if (!(h >= 0.0 && h <= 1.0))
        throw ValidationError("threshold h must lie in [0,1]");
    const std::size_t d = space.dim();
    std::vector<std::vector<double>> axis(d);
    for (std::size_t j = 0; j < d; ++j) {
        const auto& dim = space[j];
        for (std::size_t k = 0; k < points_per_dim; ++k)
            axis[j].push_back(k + 1 == points_per_dim
                                  ? dim.upper
                                  : dim.lower + (dim.upper - dim.lower) * static_cast<double>(k) /
                                                    static_cast<double>(points_per_dim - 1));
    }

    LabeledSet grid;
    grid.threshold = h;
    std::vector<std::size_t> odometer(d, 0);
    for (;;) {
        DistortionLevel level;
        level.coords.resize(d);
        for (std::size_t j = 0; j < d; ++j)
            level.coords[j] = axis[j][odometer[j]];
        const double accuracy = oracle.evaluate(level);
        grid.samples.push_back({std::move(level), accuracy, label_accuracy(accuracy, h)});

        // The last dimension varies fastest.
        std::size_t j = d;
        while (j > 0 && ++odometer[j - 1] == points_per_dim)
            odometer[--j] = 0;
        if (j == 0)
            break;
    }
    return grid;
}

SamplerKind parse_sampler_kind(const std::string& name)
{
    if (name == "gp")
        return SamplerKind::gp;
    if (name == "random")
        return SamplerKind::random;
    throw ValidationError("unknown sampler '" + name + "'");
}

std::string to_string(SamplerKind kind)
{
    return kind == SamplerKind::gp ? "gp" : "random";
}

void ExperimentConfig::validate() const
{
    if (!oracle)
        throw ValidationError("experiment needs an oracle");
    if (!(oracle->space() == space))
        throw ValidationError("oracle is defined on a different search space");
    if (!(h >= 0.0 && h <= 1.0))
        throw ValidationError("threshold h must lie in [0,1]");
    if (samplers.empty() || methods.empty() || kinds.empty() || seeds.empty())
        throw ValidationError("samplers, methods, kinds and seeds must be non-empty");
    const bool uses_gp = std::find(samplers.begin(), samplers.end(), SamplerKind::gp) != samplers.end();
    if (uses_gp)
        sampler.validate();
    else if (sampler.budget < 1)
        throw ValidationError("budget must be positive");
    if (points_per_dim < 2)
        throw ValidationError("points_per_dim must be at least 2");
    if (workers < 1)
        throw ValidationError("workers must be at least 1");
}

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// is rethrown after all threads finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn)
{
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> threads;
    const std::size_t count = std::min(workers, n);
    for (std::size_t w = 0; w < count; ++w)
        threads.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += count) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : threads)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

std::uint64_t sampler_seed(std::uint64_t seed)
{
    return derive_seed(seed, 1);
}

std::uint64_t rebalance_seed(std::uint64_t seed, ImbalanceMethod method)
{
    return derive_seed(seed, 100 + static_cast<std::uint64_t>(method));
}

void add_aggregate(ExperimentReport& report, SamplerKind sampler, ImbalanceMethod method,
                   std::optional<ModelKind> kind)
{
    Aggregate a{sampler, method, kind};
    std::vector<double> values;
    for (const auto& c : report.cells) {
        if (c.sampler != sampler || c.method != method || (kind && c.kind != *kind))
            continue;
        if (c.metrics)
            values.push_back(c.metrics->f1);
        else
            ++a.failures;
    }
    a.cells = values.size();
    if (!values.empty()) {
        double sum = 0.0;
        for (double v : values)
            sum += v;
        a.mean_f1 = sum / static_cast<double>(values.size());
        if (values.size() > 1) {
            double sq = 0.0;
            for (double v : values)
                sq += (v - a.mean_f1) * (v - a.mean_f1);
            a.std_f1 = std::sqrt(sq / static_cast<double>(values.size() - 1));
        }
    }
    report.aggregates.push_back(a);
}

} // namespace

SampledSets sample_all(const ExperimentConfig& config)
{
    config.validate();
    std::vector<std::pair<SamplerKind, std::uint64_t>> jobs;
    for (auto s : config.samplers)
        for (auto seed : config.seeds)
            jobs.emplace_back(s, seed);
    std::vector<LabeledSet> results(jobs.size());
    parallel_for(jobs.size(), config.workers, [&](std::size_t i) {
        const auto [kind, seed] = jobs[i];
        if (kind == SamplerKind::gp) {
            SamplerConfig cfg = config.sampler;
            cfg.seed = sampler_seed(seed);
            results[i] = run_gp_sampling(*config.oracle, config.space, config.h, cfg);
        } else {
            results[i] = run_random_sampling(*config.oracle, config.space, config.h,
                                             config.sampler.budget, sampler_seed(seed));
        }
    });
    SampledSets out;
    for (std::size_t i = 0; i < jobs.size(); ++i)
        out.emplace(jobs[i], std::move(results[i]));
    return out;
}

ExperimentReport evaluate_cells(const ExperimentConfig& config, const SampledSets& sampled,
                                const LabeledSet& grid)
{
    config.validate();
    ExperimentReport report;
    report.h = config.h;
    report.budget = config.sampler.budget;
    report.snapshot = config.snapshot;
    report.test_size = grid.size();
    report.test_positives = grid.positive_count();

    std::vector<std::vector<double>> grid_unit;
    std::vector<int> truth;
    grid_unit.reserve(grid.size());
    for (const auto& s : grid.samples) {
        grid_unit.push_back(config.space.normalize(s.level));
        truth.push_back(s.label);
    }

    struct Group {
        SamplerKind sampler;
        ImbalanceMethod method;
        std::uint64_t seed;
    };
    std::vector<Group> groups;
    for (auto s : config.samplers)
        for (auto m : config.methods)
            for (auto seed : config.seeds)
                groups.push_back({s, m, seed});

    std::vector<std::vector<Cell>> results(groups.size());
    parallel_for(groups.size(), config.workers, [&](std::size_t g) {
        const auto& group = groups[g];
        auto& cells = results[g];
        for (auto kind : config.kinds)
            cells.push_back({group.sampler, group.method, kind, group.seed, std::nullopt, {}});

        const auto it = sampled.find({group.sampler, group.seed});
        if (it == sampled.end()) {
            for (auto& c : cells)
                c.error = "no sampled set for this sampler and seed";
            return;
        }
        RebalancedSet balanced;
        try {
            ImbalanceOptions opt;
            opt.smote_k = config.smote_k;
            opt.near_miss_k = config.near_miss_k;
            opt.seed = rebalance_seed(group.seed, group.method);
            balanced = rebalance(it->second, config.space, group.method, opt);
        } catch (const std::exception& e) {
            for (auto& c : cells)
                c.error = std::string("rebalance: ") + e.what();
            return;
        }
        for (auto& c : cells) {
            try {
                const auto model = train(c.kind, balanced, config.space, config.hyper, group.seed);
                std::vector<int> predictions(grid_unit.size());
                for (std::size_t i = 0; i < grid_unit.size(); ++i)
                    predictions[i] = model.predict_unit(grid_unit[i]);
                c.metrics = f1_score(predictions, truth);
            } catch (const std::exception& e) {
                c.error = std::string("train: ") + e.what();
            }
        }
    });

    // Restore sampler, method, kind, seed order.
    for (auto s : config.samplers)
        for (auto m : config.methods)
            for (std::size_t k = 0; k < config.kinds.size(); ++k)
                for (std::size_t g = 0; g < groups.size(); ++g)
                    if (groups[g].sampler == s && groups[g].method == m)
                        report.cells.push_back(results[g][k]);

    for (const auto& [key, set] : sampled) {
        report.positive_counts[key] = set.positive_count();
        report.train_sizes[key] = set.size();
    }
    for (auto s : config.samplers)
        for (auto m : config.methods) {
            add_aggregate(report, s, m, std::nullopt);
            for (auto k : config.kinds)
                add_aggregate(report, s, m, k);
        }
    return report;
}

ExperimentReport run_experiment(const ExperimentConfig& config, const std::optional<LabeledSet>& grid)
{
    config.validate();
    const auto sampled = sample_all(config);
    if (grid)
        return evaluate_cells(config, sampled, *grid);
    return evaluate_cells(config, sampled,
                          build_grid_test_set(config.space, config.points_per_dim, *config.oracle,
                                              config.h));
}

std::optional<double> ExperimentReport::mean_f1(SamplerKind sampler, ImbalanceMethod method) const
{
    for (const auto& a : aggregates)
        if (a.sampler == sampler && a.method == method && !a.kind)
            return a.cells > 0 ? std::optional<double>(a.mean_f1) : std::nullopt;
    return std::nullopt;
}

double ExperimentReport::mean_positive_count(SamplerKind sampler) const
{
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [key, count] : positive_counts)
        if (key.first == sampler) {
            sum += static_cast<double>(count);
            ++n;
        }
    return n ? sum / static_cast<double>(n) : 0.0;
}

std::size_t ExperimentReport::failed_cells() const
{
    return static_cast<std::size_t>(
        std::count_if(cells.begin(), cells.end(), [](const Cell& c) { return !c.metrics; }));
}

std::vector<BudgetRow> sweep_budget(const ExperimentConfig& config, std::span<const std::size_t> budgets)
{
    config.validate();
    if (budgets.empty())
        throw ValidationError("budget sweep needs at least one budget");
    for (auto b : budgets) {
        ExperimentConfig c = config;
        c.sampler.budget = b;
        c.validate();
    }
    const auto grid =
        build_grid_test_set(config.space, config.points_per_dim, *config.oracle, config.h);
    std::vector<BudgetRow> rows;
    for (auto b : budgets) {
        ExperimentConfig c = config;
        c.sampler.budget = b;
        rows.push_back({b, run_experiment(c, grid)});
    }
    return rows;
}

ThresholdSweep sweep_threshold(const ExperimentConfig& config, std::span<const double> thresholds)
{
    config.validate();
    if (thresholds.empty())
        throw ValidationError("threshold sweep needs at least one threshold");
    for (double h : thresholds)
        if (!(h >= 0.0 && h <= 1.0))
            throw ValidationError("threshold " + std::to_string(h) + " outside [0,1]");

    auto cache = caching_oracle(config.oracle);
    ExperimentConfig cached = config;
    cached.oracle = cache;
    const auto sampled = sample_all(cached);
    const auto grid = build_grid_test_set(config.space, config.points_per_dim, *cache, config.h);

    ThresholdSweep sweep;
    sweep.oracle_calls_before = cache->inner_calls();
    for (double h : thresholds) {
        SampledSets relabeled;
        for (const auto& [key, set] : sampled)
            relabeled.emplace(key, set.relabeled(h));
        ExperimentConfig c = cached;
        c.h = h;
        sweep.rows.push_back({h, evaluate_cells(c, relabeled, grid.relabeled(h))});
    }
    sweep.oracle_calls_after = cache->inner_calls();
    return sweep;
}

// ---------------------------------------------------------------------------

std::string format_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string config_hash(const nlohmann::json& config)
{
    const std::string text = config.dump();
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

void write_cells_csv(const ExperimentReport& report, std::ostream& out)
{
    out << "sampler,method,kind,seed,tp,fp,tn,fn,precision,recall,f1\n";
    for (const auto& c : report.cells) {
        if (!c.metrics)
            continue;
        const auto& m = *c.metrics;
        out << to_string(c.sampler) << ',' << to_string(c.method) << ',' << to_string(c.kind) << ','
            << c.seed << ',' << m.true_positive << ',' << m.false_positive << ',' << m.true_negative
            << ',' << m.false_negative << ',' << format_number(m.precision) << ','
            << format_number(m.recall) << ',' << format_number(m.f1) << '\n';
    }
}

nlohmann::json summary_json(const ExperimentReport& report)
{
    nlohmann::json doc;
    doc["schema_version"] = 1;
    doc["config_hash"] = config_hash(report.snapshot.is_null() ? nlohmann::json::object()
                                                               : report.snapshot);
    doc["config"] = report.snapshot;
    doc["h"] = report.h;
    doc["budget"] = report.budget;
    doc["test_set"] = {{"size", report.test_size}, {"positives", report.test_positives}};

    std::vector<std::uint64_t> seeds;
    auto& counts = doc["positive_counts"] = nlohmann::json::array();
    for (const auto& [key, count] : report.positive_counts) {
        counts.push_back({{"sampler", to_string(key.first)},
                          {"seed", key.second},
                          {"positives", count},
                          {"train_size", report.train_sizes.at(key)}});
        if (std::find(seeds.begin(), seeds.end(), key.second) == seeds.end())
            seeds.push_back(key.second);
    }
    std::sort(seeds.begin(), seeds.end());
    doc["seeds"] = seeds;
    auto& means = doc["mean_positive_counts"] = nlohmann::json::object();
    for (const auto& [key, count] : report.positive_counts)
        means[to_string(key.first)] = report.mean_positive_count(key.first);

    auto& aggregates = doc["aggregates"] = nlohmann::json::array();
    for (const auto& a : report.aggregates)
        aggregates.push_back({{"sampler", to_string(a.sampler)},
                              {"method", to_string(a.method)},
                              {"kind", a.kind ? to_string(*a.kind) : "all"},
                              {"mean_f1", a.mean_f1},
                              {"std_f1", a.std_f1},
                              {"cells", a.cells},
                              {"failures", a.failures}});
    auto& failures = doc["failures"] = nlohmann::json::array();
    for (const auto& c : report.cells)
        if (!c.metrics)
            failures.push_back({{"sampler", to_string(c.sampler)},
                                {"method", to_string(c.method)},
                                {"kind", to_string(c.kind)},
                                {"seed", c.seed},
                                {"error", c.error}});
    return doc;
}

void write_sweep_csv(const std::string& key, std::span<const double> values,
                     std::span<const ExperimentReport* const> reports, std::ostream& out)
{
    if (values.size() != reports.size())
        throw ValidationError("sweep values and reports differ in length");
    out << key << ",sampler,method,mean_f1,std_f1,cells,failures,mean_positive_count\n";
    for (std::size_t i = 0; i < values.size(); ++i)
        for (const auto& a : reports[i]->aggregates) {
            if (a.kind)
                continue;
            out << format_number(values[i]) << ',' << to_string(a.sampler) << ','
                << to_string(a.method) << ',' << format_number(a.mean_f1) << ','
                << format_number(a.std_f1) << ',' << a.cells << ',' << a.failures << ','
                << format_number(reports[i]->mean_positive_count(a.sampler)) << '\n';
        }
}

} // namespace relia
