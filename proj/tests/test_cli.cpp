#include "relia/oracle.hpp"
#include "relia/sampler.hpp"
#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& log)
{
    const std::string cmd = std::string(RELIA_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t lines(const fs::path& p)
{
    const auto text = slurp(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

void write_json(const fs::path& p, const nlohmann::json& doc)
{
    std::ofstream(p) << doc.dump(2);
}

nlohmann::json line_config(double h)
{
    return {
        {"space", nlohmann::json::array({{{"name", "x"}, {"lower", 0}, {"upper", 1}},
                                         {{"name", "y"}, {"lower", 0}, {"upper", 1}}})},
        {"oracle", {{"type", "synthetic"}, {"kind", "box"}, {"lower", {0.0, 0.0}}, {"upper", {0.2, 0.2}}}},
        {"h", h},
        {"samplers", {"random"}},
        {"methods", {"none", "smote"}},
        {"budget", 30},
        {"points_per_dim", 5},
    };
}

} // namespace

TEST_CASE("sample writes the requested rows deterministically")
{
    const auto dir = support::scratch_dir("cli_sample");
    const std::string common = "--set budget=10 --set init_count=5 --set candidates=64 --seed 2";
    REQUIRE(run("sample " + common + " --out " + (dir / "a").string(), dir / "log") == 0);
    REQUIRE(run("sample " + common + " --out " + (dir / "b").string(), dir / "log") == 0);
    for (const char* name : {"train_gp_seed2.csv", "train_random_seed2.csv"}) {
        CHECK(lines(dir / "a" / name) == 11);
        CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
    }
    const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
    // Both samplers draw from the same seed, so the five initial GP levels
    // repeat the first five random ones and are counted once.
    CHECK(manifest["oracle_calls"] == 15);
    CHECK(manifest["seeds"] == nlohmann::json::array({2}));
    CHECK(manifest["config_hash"].get<std::string>().size() == 16);
    CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
}

TEST_CASE("validation errors exit with 1 and name the field")
{
    const auto dir = support::scratch_dir("cli_validation");
    write_json(dir / "no_oracle.json", {{"budget", 100}});
    CHECK(run("sample --config " + (dir / "no_oracle.json").string() + " --out " + (dir / "o").string(),
              dir / "log") == 1);
    CHECK(slurp(dir / "log").find("'oracle'") != std::string::npos);

    CHECK(run("pipeline --set 'methods=[\"bogus\"]' --out " + (dir / "o").string(), dir / "log") == 1);
    CHECK(slurp(dir / "log").find("methods[0]") != std::string::npos);
    CHECK(!fs::exists(dir / "o" / "report.csv"));

    CHECK(run("pipeline --config " + (dir / "missing.json").string(), dir / "log") == 1);
    CHECK(run("", dir / "log") == 1);
    CHECK(run("sample --workers zero", dir / "log") == 1);
}

TEST_CASE("step-by-step commands chain together")
{
    const auto dir = support::scratch_dir("cli_chain");
    write_json(dir / "cfg.json", line_config(0.9));
    const std::string cfg = "--config " + (dir / "cfg.json").string();
    REQUIRE(run("sample " + cfg + " --seed 0 --out " + (dir / "s").string(), dir / "log") == 0);
    // A lower threshold than the file was labeled with is caught.
    CHECK(run("rebalance " + cfg + " --set h=0.4 --input " + (dir / "s" / "train_random_seed0.csv").string() +
                  " --out " + (dir / "r").string(),
              dir / "log") == 1);
    REQUIRE(run("rebalance " + cfg + " --method random-over --input " +
                    (dir / "s" / "train_random_seed0.csv").string() + " --out " + (dir / "r").string(),
                dir / "log") == 0);
    REQUIRE(run("train " + cfg + " --kind decision-tree --input " +
                    (dir / "r" / "rebalanced_random-over.csv").string() + " --out " + (dir / "t").string(),
                dir / "log") == 0);
    REQUIRE(run("evaluate " + cfg + " --model " + (dir / "t" / "model_decision-tree.json").string() +
                    " --out " + (dir / "e").string(),
                dir / "log") == 0);
    const auto metrics = nlohmann::json::parse(slurp(dir / "e" / "metrics.json"));
    CHECK(metrics["test_size"] == 25);
    const auto& m = metrics["metrics"];
    CHECK(m["tp"].get<int>() + m["fp"].get<int>() + m["tn"].get<int>() + m["fn"].get<int>() == 25);
    CHECK(lines(dir / "e" / "test_set.csv") == 26);
}

TEST_CASE("pipeline outputs, determinism and exit codes")
{
    const auto dir = support::scratch_dir("cli_pipeline");
    write_json(dir / "cfg.json", line_config(0.9));
    const std::string cfg = "--config " + (dir / "cfg.json").string();

    // Find a seed whose 30 uniform draws hit the 4% box exactly once: the
    // unbalanced cells train, SMOTE cannot.
    const auto rc_oracle = [] {
        relia::SyntheticOracleSpec spec;
        spec.kind = relia::SyntheticKind::box;
        spec.space = support::unit_space(2);
        spec.space = relia::SearchSpace({{"x", 0, 1}, {"y", 0, 1}});
        spec.box_lower = {0.0, 0.0};
        spec.box_upper = {0.2, 0.2};
        return relia::make_synthetic_oracle(spec);
    }();
    std::uint64_t partial_seed = 0, full_seed = 0;
    bool have_partial = false, have_full = false;
    for (std::uint64_t s = 0; s < 200 && !(have_partial && have_full); ++s) {
        const auto set = relia::run_random_sampling(*rc_oracle, rc_oracle->space(), 0.9, 30,
                                                    relia::derive_seed(s, 1));
        if (set.positive_count() == 1 && !have_partial) {
            partial_seed = s;
            have_partial = true;
        }
        if (set.positive_count() >= 3 && !have_full) {
            full_seed = s;
            have_full = true;
        }
    }
    REQUIRE(have_partial);
    REQUIRE(have_full);

    const auto a = dir / "a", b = dir / "b";
    REQUIRE(run("pipeline " + cfg + " --seed " + std::to_string(full_seed) + " --out " + a.string(), dir / "log") == 0);
    REQUIRE(run("pipeline " + cfg + " --seed " + std::to_string(full_seed) + " --workers 2 --out " + b.string(),
                dir / "log") == 0);
    CHECK(slurp(a / "report.csv") == slurp(b / "report.csv"));
    CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
    CHECK(lines(a / "report.csv") == 1 + 2 * 3);
    const auto summary = nlohmann::json::parse(slurp(a / "summary.json"));
    CHECK(summary["aggregates"].size() > 0);
    const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    CHECK(manifest["config_hash"] == summary["config_hash"]);

    CHECK(run("report --input " + a.string(), dir / "log") == 0);
    CHECK(slurp(dir / "log").find("random,smote,3,") != std::string::npos);

    CHECK(run("pipeline " + cfg + " --seed " + std::to_string(partial_seed) + " --out " + (dir / "p").string(),
              dir / "log") == 2);
    CHECK(slurp(dir / "log").find("failed") != std::string::npos);
    CHECK(lines(dir / "p" / "report.csv") == 1 + 3);

    write_json(dir / "none.json", line_config(0.995));
    CHECK(run("pipeline --config " + (dir / "none.json").string() + " --seed 0 --out " + (dir / "n").string(),
              dir / "log") == 3);

    std::ofstream(dir / "blocker") << "x";
    CHECK(run("pipeline " + cfg + " --out " + (dir / "blocker" / "sub").string(), dir / "log") == 3);
}

TEST_CASE("sweeps")
{
    const auto dir = support::scratch_dir("cli_sweeps");
    auto doc = line_config(0.9);
    doc["methods"] = {"none"};
    doc["budgets"] = {20, 30};
    doc["thresholds"] = {0.6, 0.9};
    doc["seeds"] = {1, 2};
    write_json(dir / "cfg.json", doc);
    const std::string cfg = "--config " + (dir / "cfg.json").string();
    const int b = run("sweep-budget " + cfg + " --out " + (dir / "b").string(), dir / "log");
    CHECK(b <= 2);
    CHECK(lines(dir / "b" / "budget_sweep.csv") == 1 + 2);
    const int h = run("sweep-threshold " + cfg + " --out " + (dir / "h").string(), dir / "log");
    CHECK(h <= 2);
    CHECK(lines(dir / "h" / "threshold_sweep.csv") == 1 + 2);
    const auto manifest = nlohmann::json::parse(slurp(dir / "h" / "manifest.json"));
    CHECK(manifest["sweep_oracle_calls"]["before_relabeling"] ==
          manifest["sweep_oracle_calls"]["after_relabeling"]);
}
