#pragma once

#include "relia/imbalance.hpp"
#include "relia/oracle.hpp"
#include "relia/predictor.hpp"
#include "relia/sampler.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace relia {

struct Metrics {
    std::size_t true_positive = 0;
    std::size_t false_positive = 0;
    std::size_t true_negative = 0;
    std::size_t false_negative = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    std::size_t total() const
    {
        return true_positive + false_positive + true_negative + false_negative;
    }
};

/// Confusion counts with label 1 as the positive class; 0/0 ratios are 0.
Metrics f1_score(std::span<const int> predictions, std::span<const int> truth);

/// Full Cartesian grid with `points_per_dim` evenly spaced values per
/// dimension, both bounds included, labeled through the oracle.
LabeledSet build_grid_test_set(const SearchSpace& space, std::size_t points_per_dim,
                               const Oracle& oracle, double h);

enum class SamplerKind { gp, random };

SamplerKind parse_sampler_kind(const std::string& name);
std::string to_string(SamplerKind kind);

struct ExperimentConfig {
    std::shared_ptr<const Oracle> oracle;
    SearchSpace space = distortion_space();
    double h = kBenchmarkThreshold;
    /// Budget, initial design, delta, candidates, refinement and direction;
    /// its seed is ignored in favour of `seeds`.
    SamplerConfig sampler;
    std::vector<SamplerKind> samplers{SamplerKind::gp, SamplerKind::random};
    std::vector<ImbalanceMethod> methods{ImbalanceMethod::smote};
    std::vector<ModelKind> kinds{ModelKind::logistic, ModelKind::tree, ModelKind::knn};
    std::size_t points_per_dim = 4;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    ModelHyper hyper;
    std::size_t smote_k = 5;
    std::size_t near_miss_k = 3;
    /// Threads for independent sampling runs and cells; 1 runs serially.
    std::size_t workers = 1;
    /// Embedded verbatim in reports.
    nlohmann::json snapshot;

    void validate() const;
};

struct Cell {
    SamplerKind sampler;
    ImbalanceMethod method;
    ModelKind kind;
    std::uint64_t seed;
    std::optional<Metrics> metrics;
    std::string error;
};

struct Aggregate {
    SamplerKind sampler;
    ImbalanceMethod method;
    std::optional<ModelKind> kind; // empty: averaged over kinds
    std::size_t cells = 0;         // successful cells in the mean
    std::size_t failures = 0;
    double mean_f1 = 0.0;
    double std_f1 = 0.0;
};

struct ExperimentReport {
    std::vector<Cell> cells;
    std::map<std::pair<SamplerKind, std::uint64_t>, std::size_t> positive_counts;
    std::map<std::pair<SamplerKind, std::uint64_t>, std::size_t> train_sizes;
    std::vector<Aggregate> aggregates;
    std::size_t test_size = 0;
    std::size_t test_positives = 0;
    double h = 0.0;
    std::size_t budget = 0;
    nlohmann::json snapshot;

    /// Mean F1 over seeds and kinds; nullopt when every cell failed.
    std::optional<double> mean_f1(SamplerKind sampler, ImbalanceMethod method) const;
    double mean_positive_count(SamplerKind sampler) const;
    std::size_t failed_cells() const;
};

/// Sampled training sets keyed by (sampler, seed).
using SampledSets = std::map<std::pair<SamplerKind, std::uint64_t>, LabeledSet>;

/// Runs every configured sampler for every seed.
SampledSets sample_all(const ExperimentConfig& config);

/// Rebalances, trains and scores every (sampler, method, kind, seed) cell on
/// the shared test grid. A failing cell records its error; the others
/// proceed.
ExperimentReport evaluate_cells(const ExperimentConfig& config, const SampledSets& sampled,
                                const LabeledSet& grid);

/// sample_all + evaluate_cells. `grid` is built from the oracle when absent.
ExperimentReport run_experiment(const ExperimentConfig& config,
                                const std::optional<LabeledSet>& grid = std::nullopt);

struct BudgetRow {
    std::size_t budget;
    ExperimentReport report;
};

/// run_experiment per budget, sharing one test grid.
std::vector<BudgetRow> sweep_budget(const ExperimentConfig& config,
                                    std::span<const std::size_t> budgets);

struct ThresholdRow {
    double h;
    ExperimentReport report;
};

struct ThresholdSweep {
    std::vector<ThresholdRow> rows;
    std::size_t oracle_calls_before = 0;
    std::size_t oracle_calls_after = 0;
};

/// Samples once at config.h through a caching oracle, then relabels the
/// stored training and grid accuracies for every threshold and re-runs
/// rebalancing, training and scoring. The call counts audit that the
/// threshold loop queries nothing new.
ThresholdSweep sweep_threshold(const ExperimentConfig& config, std::span<const double> thresholds);

/// One row per successful cell:
/// sampler,method,kind,seed,tp,fp,tn,fn,precision,recall,f1
void write_cells_csv(const ExperimentReport& report, std::ostream& out);
/// Aggregates, positive counts, failures, config hash and seeds.
nlohmann::json summary_json(const ExperimentReport& report);

/// Rows keyed by the sweep variable, one per (value, sampler, method):
/// <key>,sampler,method,mean_f1,std_f1,cells,failures,mean_positive_count
void write_sweep_csv(const std::string& key, std::span<const double> values,
                     std::span<const ExperimentReport* const> reports, std::ostream& out);

/// FNV-1a 64 of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

/// Stable number formatting used by every CSV writer.
std::string format_number(double v);

} // namespace relia
