#include "relia/config.hpp"

#include "relia/error.hpp"

#include <fstream>

namespace relia {

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& problem)
{
    throw ValidationError("config field '" + field + "': " + problem);
}

template <typename T>
T read(const nlohmann::json& obj, const std::string& key, const std::string& path, T fallback)
{
    if (!obj.contains(key))
        return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        fail(path + key, "has the wrong type");
    }
}

template <typename T>
T require(const nlohmann::json& obj, const std::string& key, const std::string& path)
{
    if (!obj.contains(key))
        fail(path + key, "is required");
    return read<T>(obj, key, path, T{});
}

// Applies `parse` to each string of a list field, tagging errors with the index.
template <typename T, typename Parse>
std::vector<T> read_names(const nlohmann::json& doc, const std::string& key,
                          const std::vector<std::string>& fallback, Parse parse,
                          nlohmann::json& normalized)
{
    const auto names = read<std::vector<std::string>>(doc, key, "", fallback);
    if (names.empty())
        fail(key, "must not be empty");
    std::vector<T> out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        try {
            out.push_back(parse(names[i]));
        } catch (const ValidationError& e) {
            fail(key + "[" + std::to_string(i) + "]", e.what());
        }
    }
    normalized[key] = names;
    return out;
}

SearchSpace parse_space(const nlohmann::json& doc, nlohmann::json& normalized)
{
    if (!doc.contains("space") || doc.at("space") == "distortion") {
        normalized["space"] = "distortion";
        return distortion_space();
    }
    const auto& s = doc.at("space");
    if (!s.is_array())
        fail("space", "must be \"distortion\" or a list of {name, lower, upper}");
    std::vector<Dimension> dims;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const std::string path = "space[" + std::to_string(i) + "].";
        dims.push_back({require<std::string>(s[i], "name", path), require<double>(s[i], "lower", path),
                        require<double>(s[i], "upper", path)});
    }
    try {
        SearchSpace space(dims);
        normalized["space"] = s;
        return space;
    } catch (const ValidationError& e) {
        fail("space", e.what());
    }
}

std::vector<Bump> parse_bumps(const nlohmann::json& o, std::size_t d)
{
    if (!o.contains("bumps") || !o.at("bumps").is_array())
        fail("oracle.bumps", "is required");
    std::vector<Bump> bumps;
    for (std::size_t i = 0; i < o.at("bumps").size(); ++i) {
        const auto& b = o.at("bumps")[i];
        const std::string path = "oracle.bumps[" + std::to_string(i) + "].";
        Bump bump{read<double>(b, "peak", path, 0.99), require<std::vector<double>>(b, "center", path),
                  require<std::vector<double>>(b, "scales", path)};
        if (bump.center.size() != d || bump.scales.size() != d)
            fail(path + "center", "needs " + std::to_string(d) + " entries");
        bumps.push_back(std::move(bump));
    }
    return bumps;
}

VerificationSet load_images(const nlohmann::json& data, const std::string& split,
                            const std::string& path)
{
    const auto source = require<std::string>(data, "source", path);
    if (source == "shapes") {
        const auto count = read<std::size_t>(data, split + "_count", path, split == "train" ? 200 : 100);
        const auto classes = read<int>(data, "classes", path, 3);
        const auto size = read<int>(data, "size", path, 16);
        const auto seed = read<std::uint64_t>(data, "seed", path, 7);
        return make_shape_dataset(count, classes, size, split == "train" ? seed : seed + 1);
    }
    if (source == "idx") {
        const auto limit = read<std::size_t>(data, split + "_limit", path, 0);
        return load_idx_set(require<std::string>(data, split + "_images", path),
                            require<std::string>(data, split + "_labels", path), limit);
    }
    fail(path + "source", "must be 'shapes' or 'idx'");
}

std::shared_ptr<const Oracle> parse_oracle(const nlohmann::json& doc, const SearchSpace& space,
                                           double h, nlohmann::json& normalized)
{
    if (!doc.contains("oracle"))
        fail("oracle", "is required");
    const auto& o = doc.at("oracle");
    if (!o.is_object())
        fail("oracle", "must be an object");
    const auto type = require<std::string>(o, "type", "oracle.");
    normalized["oracle"] = o;
    try {
        if (type == "synthetic") {
            if (o.contains("preset")) {
                const auto preset = require<std::string>(o, "preset", "oracle.");
                if (preset != "benchmark")
                    fail("oracle.preset", "unknown preset '" + preset + "'");
                if (!(space == distortion_space()))
                    fail("space", "the benchmark preset is defined on the distortion space");
                return make_synthetic_oracle(benchmark_oracle_spec());
            }
            const auto kind = require<std::string>(o, "kind", "oracle.");
            SyntheticOracleSpec spec;
            if (kind == "ellipsoid") {
                if (o.contains("bumps")) {
                    spec.kind = SyntheticKind::ellipsoid;
                    spec.space = space;
                    spec.bumps = parse_bumps(o, space.dim());
                } else {
                    spec = ellipsoid_with_fraction(space, read<double>(o, "peak", "oracle.", 0.99), h,
                                                   read<double>(o, "positive_fraction", "oracle.", 0.03));
                }
            } else if (kind == "box") {
                spec.kind = SyntheticKind::box;
                spec.space = space;
                spec.box_lower = require<std::vector<double>>(o, "lower", "oracle.");
                spec.box_upper = require<std::vector<double>>(o, "upper", "oracle.");
                spec.inside = read<double>(o, "inside", "oracle.", 0.99);
                spec.outside = read<double>(o, "outside", "oracle.", 0.5);
            } else if (kind == "multimodal") {
                spec.kind = SyntheticKind::multimodal;
                spec.space = space;
                spec.bumps = parse_bumps(o, space.dim());
                spec.floor = read<double>(o, "floor", "oracle.", 0.0);
            } else {
                fail("oracle.kind", "must be 'box', 'ellipsoid' or 'multimodal'");
            }
            return make_synthetic_oracle(std::move(spec));
        }
        if (type == "classifier") {
            if (!(space == distortion_space()))
                fail("space", "classifier oracles use the distortion space");
            const auto kind = parse_reference_kind(read<std::string>(o, "classifier", "oracle.",
                                                                     "nearest-centroid"));
            if (!o.contains("data"))
                fail("oracle.data", "is required");
            const auto& data = o.at("data");
            auto train = load_images(data, "train", "oracle.data.");
            auto verification = load_images(data, "verification", "oracle.data.");
            return make_classifier_oracle(train_reference_classifier(train, kind),
                                          std::move(verification),
                                          read<std::uint64_t>(o, "rain_seed", "oracle.", 0));
        }
    } catch (const ValidationError& e) {
        const std::string what = e.what();
        if (what.rfind("config field", 0) == 0)
            throw;
        fail("oracle", what);
    }
    fail("oracle.type", "must be 'synthetic' or 'classifier'");
}

} // namespace

RunConfig parse_run_config(const nlohmann::json& doc)
{
    if (!doc.is_object())
        throw ValidationError("config must be a JSON object");
    RunConfig rc;
    auto& n = rc.normalized;
    const int version = read<int>(doc, "schema_version", "", kConfigSchemaVersion);
    if (version != kConfigSchemaVersion)
        fail("schema_version", "unsupported version " + std::to_string(version));
    n["schema_version"] = version;

    auto& ex = rc.experiment;
    ex.space = parse_space(doc, n);

    if (doc.contains("h") && doc.contains("h_preset"))
        fail("h", "give either h or h_preset, not both");
    if (doc.contains("h_preset")) {
        const auto name = require<std::string>(doc, "h_preset", "");
        const auto preset = threshold_preset(name);
        if (!preset)
            fail("h_preset", "unknown dataset '" + name + "'");
        ex.h = *preset;
        n["h_preset"] = name;
    } else {
        ex.h = read<double>(doc, "h", "", kBenchmarkThreshold);
    }
    if (!(ex.h >= 0.0 && ex.h <= 1.0))
        fail("h", "must lie in [0,1]");
    n["h"] = ex.h;

    auto& s = ex.sampler;
    s.budget = read<std::size_t>(doc, "budget", "", 600);
    s.init_count = read<std::size_t>(doc, "init_count", "", 20);
    s.delta = read<double>(doc, "delta", "", 0.1);
    s.candidates = read<std::size_t>(doc, "candidates", "", 2048);
    s.refine_steps = read<std::size_t>(doc, "refine_steps", "", 32);
    try {
        s.direction = parse_direction(read<std::string>(doc, "minority_direction", "", "above"));
    } catch (const ValidationError& e) {
        fail("minority_direction", e.what());
    }
    if (s.budget < 1)
        fail("budget", "must be positive");
    if (!(s.delta > 0.0 && s.delta < 1.0))
        fail("delta", "must lie in (0,1)");
    if (s.candidates < 1)
        fail("candidates", "must be positive");
    n["budget"] = s.budget;
    n["init_count"] = s.init_count;
    n["delta"] = s.delta;
    n["candidates"] = s.candidates;
    n["refine_steps"] = s.refine_steps;
    n["minority_direction"] = to_string(s.direction);

    ex.samplers = read_names<SamplerKind>(doc, "samplers", {"gp", "random"}, parse_sampler_kind, n);
    ex.methods = read_names<ImbalanceMethod>(doc, "methods", {"smote"}, parse_imbalance_method, n);
    ex.kinds = read_names<ModelKind>(doc, "kinds", {"logistic-regression", "decision-tree", "k-nn"},
                                     parse_model_kind, n);
    const bool uses_gp =
        std::find(ex.samplers.begin(), ex.samplers.end(), SamplerKind::gp) != ex.samplers.end();
    if (uses_gp && s.init_count < 1)
        fail("init_count", "must be positive");
    if (uses_gp && s.init_count >= s.budget)
        fail("init_count", "must be smaller than budget");

    ex.points_per_dim = read<std::size_t>(doc, "points_per_dim", "", 4);
    if (ex.points_per_dim < 2)
        fail("points_per_dim", "must be at least 2");
    n["points_per_dim"] = ex.points_per_dim;
    ex.seeds = read<std::vector<std::uint64_t>>(doc, "seeds", "", {0, 1, 2, 3, 4});
    if (ex.seeds.empty())
        fail("seeds", "must not be empty");
    n["seeds"] = ex.seeds;
    ex.smote_k = read<std::size_t>(doc, "smote_k", "", 5);
    ex.near_miss_k = read<std::size_t>(doc, "near_miss_k", "", 3);
    if (ex.smote_k < 1)
        fail("smote_k", "must be positive");
    if (ex.near_miss_k < 1)
        fail("near_miss_k", "must be positive");
    n["smote_k"] = ex.smote_k;
    n["near_miss_k"] = ex.near_miss_k;

    rc.budgets = read<std::vector<std::size_t>>(doc, "budgets", "", {100, 600});
    for (std::size_t i = 0; i < rc.budgets.size(); ++i)
        if (uses_gp && rc.budgets[i] <= s.init_count)
            fail("budgets[" + std::to_string(i) + "]", "must exceed init_count");
    n["budgets"] = rc.budgets;
    std::vector<double> preset_thresholds;
    for (const auto& [name, h] : threshold_presets())
        preset_thresholds.push_back(h);
    std::sort(preset_thresholds.begin(), preset_thresholds.end());
    rc.thresholds = read<std::vector<double>>(doc, "thresholds", "", preset_thresholds);
    for (std::size_t i = 0; i < rc.thresholds.size(); ++i)
        if (!(rc.thresholds[i] >= 0.0 && rc.thresholds[i] <= 1.0))
            fail("thresholds[" + std::to_string(i) + "]", "must lie in [0,1]");
    n["thresholds"] = rc.thresholds;

    ex.workers = read<std::size_t>(doc, "workers", "", 1);
    if (ex.workers < 1)
        fail("workers", "must be at least 1");
    rc.out = read<std::string>(doc, "out", "", "out");

    // Last: building a classifier oracle loads images and trains the
    // reference model, but never evaluates the oracle.
    ex.oracle = parse_oracle(doc, ex.space, ex.h, n);
    ex.snapshot = n;
    ex.validate();
    return rc;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot read config file " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_run_config(doc);
}

nlohmann::json benchmark_config()
{
    return {
        {"schema_version", kConfigSchemaVersion},
        {"oracle", {{"type", "synthetic"}, {"preset", "benchmark"}}},
        {"space", "distortion"},
        {"h", kBenchmarkThreshold},
        {"budget", 600},
        {"init_count", 20},
        {"delta", 0.1},
        {"samplers", {"gp", "random"}},
        {"methods", {"none", "smote"}},
        {"kinds", {"logistic-regression", "decision-tree", "k-nn"}},
        {"points_per_dim", 4},
        {"seeds", {0, 1, 2, 3, 4}},
    };
}

} // namespace relia
