// relia_cli: sample, rebalance, train and evaluate distortion-classifiers,
// or run the whole experiment matrix and its sweeps.

#include "relia/config.hpp"
#include "relia/error.hpp"
#include "relia/evaluation.hpp"
#include "relia/io.hpp"
#include "relia/oracle.hpp"
#include "relia/predictor.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace relia;

namespace {

enum Exit { ok = 0, validation = 1, partial = 2, runtime = 3 };

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> out;
    std::vector<std::string> sets;
};

// Applies flag overrides to the raw document so that they pass through the
// same validation as file contents.
json load_document(const Common& c)
{
    json doc;
    if (c.config.empty() || c.config == "benchmark") {
        doc = benchmark_config();
    } else {
        std::ifstream in(c.config);
        if (!in)
            throw ValidationError("cannot read config file " + c.config);
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw ValidationError("config file " + c.config + " is not valid JSON: " + e.what());
        }
    }
    if (!doc.is_object())
        throw ValidationError("config must be a JSON object");
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ValidationError("--set expects field=value, got '" + s + "'");
        const std::string key = s.substr(0, eq);
        const std::string text = s.substr(eq + 1);
        json value;
        try {
            value = json::parse(text);
        } catch (const json::exception&) {
            value = text;
        }
        doc[key] = value;
    }
    if (c.seed)
        doc["seeds"] = json::array({*c.seed});
    if (c.workers)
        doc["workers"] = *c.workers;
    if (c.out)
        doc["out"] = *c.out;
    return doc;
}

struct Run {
    RunConfig rc;
    std::shared_ptr<CachingOracle> counter;
};

Run prepare(const Common& c)
{
    Run run{parse_run_config(load_document(c)), nullptr};
    run.counter = caching_oracle(run.rc.experiment.oracle);
    run.rc.experiment.oracle = run.counter;
    fs::create_directories(run.rc.out);
    return run;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out)
        throw std::runtime_error("failed writing " + path.string());
}

template <class Writer>
void write_file(const fs::path& path, Writer&& writer)
{
    std::ostringstream s;
    writer(s);
    write_text(path, s.str());
}

void write_manifest(const Run& run, const std::string& command, const std::vector<std::string>& files,
                    json extra = json::object())
{
    json m = {
        {"command", command},
        {"config_hash", config_hash(run.rc.normalized)},
        {"config", run.rc.normalized},
        {"seeds", run.rc.experiment.seeds},
        {"oracle_calls", run.counter ? run.counter->inner_calls() : 0},
        {"files", files},
    };
    for (auto& [k, v] : extra.items())
        m[k] = v;
    write_text(run.rc.out / "manifest.json", m.dump(2) + "\n");
}

std::string sampled_name(SamplerKind sampler, std::uint64_t seed)
{
    return "train_" + to_string(sampler) + "_seed" + std::to_string(seed) + ".csv";
}

int cmd_sample(const Common& c, const std::vector<std::string>& sampler_names)
{
    std::vector<SamplerKind> samplers;
    for (const auto& name : sampler_names)
        samplers.push_back(parse_sampler_kind(name));
    Run run = prepare(c);
    auto& ex = run.rc.experiment;
    if (!samplers.empty())
        ex.samplers = samplers;
    const auto sampled = sample_all(ex);
    std::vector<std::string> files;
    json positives = json::object();
    for (const auto& [key, set] : sampled) {
        const auto name = sampled_name(key.first, key.second);
        write_file(run.rc.out / name, [&](std::ostream& o) { write_labeled_csv(set, ex.space, o); });
        files.push_back(name);
        positives[name] = set.positive_count();
        std::cout << name << ": " << set.size() << " samples, " << set.positive_count()
                  << " positive\n";
    }
    write_manifest(run, "sample", files, {{"positive_counts", positives}});
    return ok;
}

int cmd_rebalance(const Common& c, const std::string& input, const std::string& method_name)
{
    Run run = prepare(c);
    auto& ex = run.rc.experiment;
    const ImbalanceMethod method =
        method_name.empty() ? ex.methods.front() : parse_imbalance_method(method_name);
    std::ifstream in(input);
    if (!in)
        throw ValidationError("cannot read training set " + input);
    const LabeledSet set = read_labeled_csv(in, ex.space, ex.h);
    ImbalanceOptions opt;
    opt.smote_k = ex.smote_k;
    opt.near_miss_k = ex.near_miss_k;
    opt.seed = derive_seed(ex.seeds.front(), 100 + static_cast<std::uint64_t>(method));
    const RebalancedSet out = rebalance(set, ex.space, method, opt);
    const auto name = "rebalanced_" + to_string(method) + ".csv";
    write_file(run.rc.out / name, [&](std::ostream& o) { write_rebalanced_csv(out, ex.space, o); });
    std::cout << name << ": " << out.count(1) << " positive, " << out.count(0) << " negative, "
              << out.synthetic_count() << " synthetic\n";
    write_manifest(run, "rebalance", {name},
                   {{"input", input}, {"method", to_string(method)}, {"rebalance_seed", opt.seed}});
    return ok;
}

int cmd_train(const Common& c, const std::string& input, const std::string& kind_name)
{
    Run run = prepare(c);
    auto& ex = run.rc.experiment;
    const ModelKind kind = kind_name.empty() ? ex.kinds.front() : parse_model_kind(kind_name);
    std::ifstream in(input);
    if (!in)
        throw ValidationError("cannot read rebalanced set " + input);
    const RebalancedSet set = read_rebalanced_csv(in, ex.space);
    const auto model = train(kind, set, ex.space, ex.hyper);
    for (const auto& w : model.report().warnings)
        std::cerr << "warning: " << w << '\n';
    const auto name = "model_" + to_string(kind) + ".json";
    write_text(run.rc.out / name, model.to_json().dump(2) + "\n");
    std::cout << name << ": trained on " << set.samples.size() << " rows\n";
    write_manifest(run, "train", {name}, {{"input", input}, {"kind", to_string(kind)}});
    return ok;
}

json metrics_json(const Metrics& m)
{
    return {{"tp", m.true_positive},   {"fp", m.false_positive}, {"tn", m.true_negative},
            {"fn", m.false_negative},  {"precision", m.precision}, {"recall", m.recall},
            {"f1", m.f1}};
}

int cmd_evaluate(const Common& c, const std::string& model_path)
{
    Run run = prepare(c);
    auto& ex = run.rc.experiment;
    std::ifstream in(model_path);
    if (!in)
        throw ValidationError("cannot read model " + model_path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ValidationError("model file " + model_path + " is not valid JSON: " + e.what());
    }
    const auto model = DistortionClassifier::from_json(doc);
    if (!(model.space() == ex.space))
        throw ValidationError("model was trained on a different search space");
    const LabeledSet grid = build_grid_test_set(ex.space, ex.points_per_dim, *ex.oracle, ex.h);
    std::vector<int> pred, truth;
    for (const auto& s : grid.samples) {
        pred.push_back(model.predict_label(s.level));
        truth.push_back(s.label);
    }
    const Metrics m = f1_score(pred, truth);
    write_file(run.rc.out / "test_set.csv",
               [&](std::ostream& o) { write_labeled_csv(grid, ex.space, o); });
    const json result = {{"model", model_path}, {"kind", to_string(model.kind())},
                         {"test_size", grid.size()}, {"test_positives", grid.positive_count()},
                         {"metrics", metrics_json(m)}};
    write_text(run.rc.out / "metrics.json", result.dump(2) + "\n");
    std::cout << "f1 " << format_number(m.f1) << " (tp " << m.true_positive << ", fp "
              << m.false_positive << ", fn " << m.false_negative << ")\n";
    write_manifest(run, "evaluate", {"test_set.csv", "metrics.json"});
    return ok;
}

int cell_status(const ExperimentReport& report)
{
    const std::size_t failed = report.failed_cells();
    if (failed == 0)
        return ok;
    return failed == report.cells.size() ? runtime : partial;
}

void print_aggregates(const ExperimentReport& report)
{
    for (const auto& a : report.aggregates) {
        if (a.kind)
            continue;
        std::cout << to_string(a.sampler) << '/' << to_string(a.method) << ": mean f1 "
                  << format_number(a.mean_f1) << " over " << a.cells << " cells";
        if (a.failures)
            std::cout << ", " << a.failures << " failed";
        std::cout << '\n';
    }
}

void report_failures(const ExperimentReport& report)
{
    for (const auto& cell : report.cells)
        if (!cell.metrics)
            std::cerr << "cell " << to_string(cell.sampler) << '/' << to_string(cell.method) << '/'
                      << to_string(cell.kind) << '/' << cell.seed << " failed: " << cell.error
                      << '\n';
}

int cmd_pipeline(const Common& c)
{
    Run run = prepare(c);
    const auto report = run_experiment(run.rc.experiment);
    write_file(run.rc.out / "report.csv", [&](std::ostream& o) { write_cells_csv(report, o); });
    write_text(run.rc.out / "summary.json", summary_json(report).dump(2) + "\n");
    write_manifest(run, "pipeline", {"report.csv", "summary.json"},
                   {{"failed_cells", report.failed_cells()}});
    report_failures(report);
    print_aggregates(report);
    return cell_status(report);
}

int worst(int a, int b)
{
    return std::max(a, b);
}

int cmd_sweep_budget(const Common& c)
{
    Run run = prepare(c);
    const auto rows = sweep_budget(run.rc.experiment, run.rc.budgets);
    std::vector<double> values;
    std::vector<const ExperimentReport*> reports;
    json summaries = json::array();
    int status = ok;
    for (const auto& row : rows) {
        values.push_back(static_cast<double>(row.budget));
        reports.push_back(&row.report);
        summaries.push_back({{"budget", row.budget}, {"summary", summary_json(row.report)}});
        report_failures(row.report);
        status = worst(status, cell_status(row.report));
    }
    write_file(run.rc.out / "budget_sweep.csv",
               [&](std::ostream& o) { write_sweep_csv("budget", values, reports, o); });
    write_text(run.rc.out / "budget_sweep.json", summaries.dump(2) + "\n");
    write_manifest(run, "sweep-budget", {"budget_sweep.csv", "budget_sweep.json"});
    for (const auto& row : rows) {
        std::cout << "budget " << row.budget << '\n';
        print_aggregates(row.report);
    }
    return status;
}

int cmd_sweep_threshold(const Common& c)
{
    Run run = prepare(c);
    const auto sweep = sweep_threshold(run.rc.experiment, run.rc.thresholds);
    std::vector<double> values;
    std::vector<const ExperimentReport*> reports;
    json summaries = json::array();
    int status = ok;
    for (const auto& row : sweep.rows) {
        values.push_back(row.h);
        reports.push_back(&row.report);
        summaries.push_back({{"h", row.h}, {"summary", summary_json(row.report)}});
        report_failures(row.report);
        status = worst(status, cell_status(row.report));
    }
    write_file(run.rc.out / "threshold_sweep.csv",
               [&](std::ostream& o) { write_sweep_csv("h", values, reports, o); });
    write_text(run.rc.out / "threshold_sweep.json", summaries.dump(2) + "\n");
    write_manifest(run, "sweep-threshold", {"threshold_sweep.csv", "threshold_sweep.json"},
                   {{"sweep_oracle_calls",
                     {{"before_relabeling", sweep.oracle_calls_before},
                      {"after_relabeling", sweep.oracle_calls_after}}}});
    for (const auto& row : sweep.rows) {
        std::cout << "h " << format_number(row.h) << '\n';
        print_aggregates(row.report);
    }
    std::cout << "oracle calls during relabeling: "
              << sweep.oracle_calls_after - sweep.oracle_calls_before << '\n';
    return status;
}

// Recomputes per-(sampler, method) means from a report.csv.
int cmd_report(const std::string& input)
{
    fs::path path = input;
    if (fs::is_directory(path))
        path /= "report.csv";
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot read report " + path.string());
    std::string line;
    if (!std::getline(in, line) ||
        line != "sampler,method,kind,seed,tp,fp,tn,fn,precision,recall,f1")
        throw ValidationError(path.string() + " is not a cell report");
    std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> sums;
    for (std::size_t row = 1; std::getline(in, line); ++row) {
        if (line.empty())
            continue;
        std::vector<std::string> f;
        std::istringstream s(line);
        for (std::string field; std::getline(s, field, ',');)
            f.push_back(field);
        if (f.size() != 11)
            throw ValidationError("report row " + std::to_string(row) + " has " +
                                  std::to_string(f.size()) + " fields");
        auto& [sum, n] = sums[{f[0], f[1]}];
        try {
            sum += std::stod(f[10]);
        } catch (const std::exception&) {
            throw ValidationError("report row " + std::to_string(row) + ": bad f1 '" + f[10] + "'");
        }
        ++n;
    }
    std::cout << "sampler,method,cells,mean_f1\n";
    for (const auto& [key, v] : sums)
        std::cout << key.first << ',' << key.second << ',' << v.second << ','
                  << format_number(v.first / static_cast<double>(v.second)) << '\n';
    return ok;
}

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--config", c.config, "JSON config file, or 'benchmark' (default)");
    cmd->add_option("--seed", c.seed, "Run this single seed instead of the configured list");
    cmd->add_option("--workers", c.workers, "Worker threads (default 1)");
    cmd->add_option("--out", c.out, "Output directory");
    cmd->add_option("--set", c.sets, "Override a top-level config field: field=value");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Reliability auditing of image classifiers under distortion"};
    app.require_subcommand(1);

    Common common;
    std::vector<std::string> samplers;
    std::string input, method, kind, model;

    auto* sample = app.add_subcommand("sample", "Sample labeled training sets");
    add_common(sample, common);
    sample->add_option("--sampler", samplers, "gp or random (default: configured samplers)");

    auto* rebalance_cmd = app.add_subcommand("rebalance", "Rebalance a sampled training set");
    add_common(rebalance_cmd, common);
    rebalance_cmd->add_option("--input", input, "Training-set CSV")->required();
    rebalance_cmd->add_option("--method", method, "Imbalance method (default: first configured)");

    auto* train_cmd = app.add_subcommand("train", "Train a distortion-classifier");
    add_common(train_cmd, common);
    train_cmd->add_option("--input", input, "Rebalanced-set CSV")->required();
    train_cmd->add_option("--kind", kind, "Model kind (default: first configured)");

    auto* evaluate = app.add_subcommand("evaluate", "Score a model on the grid test set");
    add_common(evaluate, common);
    evaluate->add_option("--model", model, "Model JSON")->required();

    auto* pipeline = app.add_subcommand("pipeline", "Run the full experiment matrix");
    add_common(pipeline, common);
    auto* sweep_b = app.add_subcommand("sweep-budget", "F1 against the sampling budget");
    add_common(sweep_b, common);
    auto* sweep_h = app.add_subcommand("sweep-threshold", "F1 against the reliability threshold");
    add_common(sweep_h, common);

    auto* report = app.add_subcommand("report", "Summarize an existing report.csv");
    report->add_option("--input", input, "report.csv or the directory holding it")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : validation;
    }

    try {
        if (*sample)
            return cmd_sample(common, samplers);
        if (*rebalance_cmd)
            return cmd_rebalance(common, input, method);
        if (*train_cmd)
            return cmd_train(common, input, kind);
        if (*evaluate)
            return cmd_evaluate(common, model);
        if (*pipeline)
            return cmd_pipeline(common);
        if (*sweep_b)
            return cmd_sweep_budget(common);
        if (*sweep_h)
            return cmd_sweep_threshold(common);
        if (*report)
            return cmd_report(input);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return validation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return runtime;
    }
    return validation;
}
