#include "relia/error.hpp"
#include "relia/imbalance.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>
#include <cmath>
#include <map>
#include <random>

using namespace relia;

namespace {

double dist(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
        s += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(s);
}

LabeledSet ten_vs_two()
{
    std::vector<std::vector<double>> pts;
    std::vector<int> labels;
    for (int i = 0; i < 12; ++i) {
        pts.push_back({i / 12.0, (i * 7 % 12) / 12.0});
        labels.push_back(i < 2 ? 1 : 0);
    }
    return support::make_set(pts, labels);
}

void check_reals_untouched(const LabeledSet& in, const RebalancedSet& out)
{
    for (const auto& s : out.samples) {
        if (s.synthetic)
            continue;
        REQUIRE(s.parent < in.size());
        CHECK(s.coords == in.samples[s.parent].level.coords);
        CHECK(s.label == in.samples[s.parent].label);
    }
}

} // namespace

TEST_CASE("method names")
{
    for (auto m : {ImbalanceMethod::none, ImbalanceMethod::smote, ImbalanceMethod::random_over,
                   ImbalanceMethod::random_under, ImbalanceMethod::near_miss, ImbalanceMethod::reweight})
        CHECK(parse_imbalance_method(to_string(m)) == m);
    CHECK_THROWS_AS(parse_imbalance_method("adasyn"), ValidationError);
}

TEST_CASE("smote midpoint through the gap hook")
{
    const auto space = support::unit_space(2);
    const auto set = support::make_set({{0, 0}, {1, 1}, {0.2, 0.9}, {0.8, 0.1}, {0.5, 0.0}},
                                       {1, 1, 0, 0, 0});
    ImbalanceOptions opt;
    opt.smote_k = 1;
    opt.smote_gap = 0.5;
    const auto out = smote(set, space, opt);
    CHECK(out.count(1) == 3);
    CHECK(out.count(0) == 3);
    REQUIRE(out.synthetic_count() == 1);
    const auto& s = out.samples.back();
    CHECK(s.synthetic);
    CHECK(s.coords == std::vector<double>{0.5, 0.5});
    CHECK(s.weight == 1.0);
}

TEST_CASE("smote needs two minority samples")
{
    const auto space = support::unit_space(1);
    const auto set = support::make_set({{0.1}, {0.2}, {0.3}}, {1, 0, 0});
    CHECK_THROWS_WITH_AS(smote(set, space, {}), doctest::Contains("random-over"), ValidationError);
    const auto one_class = support::make_set({{0.1}, {0.2}}, {0, 0});
    CHECK_THROWS_AS(smote(one_class, space, {}), ValidationError);
    const auto balanced = support::make_set({{0.1}, {0.2}}, {0, 1});
    CHECK(smote(balanced, space, {}).synthetic_count() == 0);
}

TEST_CASE("smote points sit on parent-to-neighbour segments")
{
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t d = 1 + gen() % 4;
        const std::size_t n = 6 + gen() % 50;
        const auto space = support::unit_space(d);
        const auto pts = support::random_points(n, d, gen());
        std::vector<int> labels(n, 0);
        const std::size_t minority = 2 + gen() % (n / 2 - 1);
        for (std::size_t i = 0; i < minority; ++i)
            labels[i] = 1;
        const auto set = support::make_set(pts, labels);
        ImbalanceOptions opt;
        opt.smote_k = 1 + gen() % 6;
        opt.seed = gen();
        const auto out = smote(set, space, opt);
        const auto split_min = set.positive_count() <= set.size() - set.positive_count() ? 1 : 0;
        CHECK(out.count(0) == out.count(1));
        check_reals_untouched(set, out);

        std::vector<std::size_t> mins;
        for (std::size_t i = 0; i < n; ++i)
            if (labels[i] == split_min)
                mins.push_back(i);
        const std::size_t k = std::min(opt.smote_k, mins.size() - 1);
        for (const auto& s : out.samples) {
            if (!s.synthetic)
                continue;
            REQUIRE(s.neighbor);
            const auto& p = pts[s.parent];
            const auto& q = pts[*s.neighbor];
            // brute-force k-th neighbour distance of the parent
            std::vector<double> ds;
            for (auto i : mins)
                if (i != s.parent)
                    ds.push_back(dist(pts[i], p));
            std::sort(ds.begin(), ds.end());
            CHECK(dist(q, p) <= ds[k - 1] + 1e-12);
            // collinear with a gap in [0,1]
            double gap = -1.0;
            for (std::size_t j = 0; j < d; ++j)
                if (std::abs(q[j] - p[j]) > 1e-12) {
                    gap = (s.coords[j] - p[j]) / (q[j] - p[j]);
                    break;
                }
            CHECK(gap >= -1e-12);
            CHECK(gap <= 1.0 + 1e-12);
            for (std::size_t j = 0; j < d; ++j)
                CHECK(std::abs(s.coords[j] - (p[j] + gap * (q[j] - p[j]))) <= 1e-9);
        }
    }
}

TEST_CASE("smote stays inside the minority bounding box and is deterministic")
{
    const auto space = distortion_space();
    std::vector<std::vector<double>> pts;
    std::vector<int> labels;
    for (const auto& u : support::random_points(80, 6, 12)) {
        pts.push_back(space.denormalize(u).coords);
        labels.push_back(u[0] < 0.2 ? 1 : 0);
    }
    const auto set = support::make_set(pts, labels);
    ImbalanceOptions opt;
    opt.seed = 3;
    const auto a = smote(set, space, opt);
    const auto b = smote(set, space, opt);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i)
        CHECK(a.samples[i].coords == b.samples[i].coords);
    for (std::size_t j = 0; j < 6; ++j) {
        double lo = 1e9, hi = -1e9;
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (labels[i] == 1) {
                lo = std::min(lo, pts[i][j]);
                hi = std::max(hi, pts[i][j]);
            }
        for (const auto& s : a.samples)
            if (s.synthetic) {
                CHECK(s.coords[j] >= lo);
                CHECK(s.coords[j] <= hi);
            }
    }
}

TEST_CASE("random over-sampling")
{
    const auto set = ten_vs_two();
    const auto out = random_over(set, 9);
    CHECK(out.count(1) == 10);
    CHECK(out.count(0) == 10);
    CHECK(out.synthetic_count() == 8);
    check_reals_untouched(set, out);
    std::multiset<std::size_t> parents, again_parents;
    for (const auto& s : out.samples)
        if (s.synthetic) {
            CHECK(s.coords == set.samples[s.parent].level.coords);
            CHECK(s.label == 1);
            parents.insert(s.parent);
        }
    for (const auto& s : random_over(set, 9).samples)
        if (s.synthetic)
            again_parents.insert(s.parent);
    CHECK(parents == again_parents);
    const auto balanced = support::make_set({{0.1, 0.1}, {0.9, 0.9}}, {0, 1});
    CHECK(random_over(balanced, 1).synthetic_count() == 0);
    const auto single = support::make_set({{0.1, 0.1}}, {1});
    CHECK_THROWS_AS(random_over(single, 1), ValidationError);
}

TEST_CASE("random under-sampling")
{
    const auto set = ten_vs_two();
    const auto out = random_under(set, 4);
    CHECK(out.count(0) == 2);
    CHECK(out.count(1) == 2);
    CHECK(out.synthetic_count() == 0);
    check_reals_untouched(set, out);
    std::vector<std::size_t> kept, again;
    for (const auto& s : out.samples)
        kept.push_back(s.parent);
    for (const auto& s : random_under(set, 4).samples)
        again.push_back(s.parent);
    CHECK(kept == again);
    const auto balanced = support::make_set({{0.1, 0.1}, {0.9, 0.9}}, {0, 1});
    CHECK(random_under(balanced, 1).samples.size() == 2);
}

TEST_CASE("near miss")
{
    const auto space = SearchSpace({{"x", 0.0, 10.0}});
    const auto set = support::make_set({{0}, {1}, {5}, {9}}, {1, 0, 0, 0});
    const auto out = near_miss(set, space, 3);
    REQUIRE(out.samples.size() == 2);
    std::vector<double> majority;
    for (const auto& s : out.samples)
        if (s.label == 0)
            majority.push_back(s.coords[0]);
    CHECK(majority == std::vector<double>{1.0});

    // Exhaustive ranking on random sets.
    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 5 + gen() % 45;
        const auto pts = support::random_points(n, 3, gen());
        std::vector<int> labels(n, 0);
        const std::size_t minority = 1 + gen() % (n / 2);
        for (std::size_t i = 0; i < minority; ++i)
            labels[i] = 1;
        const auto s = support::make_set(pts, labels);
        const std::size_t k = 1 + gen() % 4;
        const auto result = near_miss(s, support::unit_space(3), k);
        const int min_label = s.positive_count() <= n - s.positive_count() ? 1 : 0;
        std::vector<std::pair<double, std::size_t>> scores;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] == min_label)
                continue;
            std::vector<double> ds;
            for (std::size_t m = 0; m < n; ++m)
                if (labels[m] == min_label)
                    ds.push_back(dist(pts[i], pts[m]));
            std::sort(ds.begin(), ds.end());
            const std::size_t kk = std::min(k, ds.size());
            double mean = 0.0;
            for (std::size_t t = 0; t < kk; ++t)
                mean += ds[t];
            scores.emplace_back(mean / static_cast<double>(kk), i);
        }
        std::sort(scores.begin(), scores.end());
        const std::size_t keep = std::min(s.positive_count(), n - s.positive_count());
        std::vector<std::size_t> expected;
        for (std::size_t t = 0; t < keep; ++t)
            expected.push_back(scores[t].second);
        std::sort(expected.begin(), expected.end());
        std::vector<std::size_t> got;
        for (const auto& w : result.samples)
            if (w.label != min_label)
                got.push_back(w.parent);
        std::sort(got.begin(), got.end());
        CHECK(got == expected);
        CHECK(result.count(0) == result.count(1));
    }
}

TEST_CASE("cost-sensitive weights")
{
    std::vector<std::vector<double>> pts;
    std::vector<int> labels;
    for (int i = 0; i < 100; ++i) {
        pts.push_back({i / 100.0});
        labels.push_back(i < 10 ? 1 : 0);
    }
    const auto out = cost_sensitive_weights(support::make_set(pts, labels));
    CHECK(out.samples.size() == 100);
    double pos = 0.0, neg = 0.0;
    for (const auto& s : out.samples) {
        if (s.label == 1) {
            CHECK(s.weight == doctest::Approx(5.0).epsilon(1e-15));
            pos += s.weight;
        } else {
            CHECK(s.weight == doctest::Approx(100.0 / 180.0).epsilon(1e-15));
            CHECK(s.weight == doctest::Approx(0.5556).epsilon(1e-4));
            neg += s.weight;
        }
    }
    CHECK(std::abs(pos - neg) <= 1e-9);
    const auto balanced = cost_sensitive_weights(support::make_set({{0.1}, {0.9}}, {0, 1}));
    for (const auto& s : balanced.samples)
        CHECK(s.weight == 1.0);
}

TEST_CASE("rebalance dispatch keeps provenance")
{
    const auto set = ten_vs_two();
    const auto space = support::unit_space(2);
    ImbalanceOptions opt;
    opt.seed = 12;
    for (auto m : {ImbalanceMethod::none, ImbalanceMethod::smote, ImbalanceMethod::random_over,
                   ImbalanceMethod::random_under, ImbalanceMethod::near_miss, ImbalanceMethod::reweight}) {
        const auto out = rebalance(set, space, m, opt);
        CHECK(out.method == to_string(m));
        for (const auto& s : out.samples)
            CHECK(s.weight > 0.0);
        const bool oversamples = m == ImbalanceMethod::smote || m == ImbalanceMethod::random_over;
        if (!oversamples)
            CHECK(out.synthetic_count() == 0);
    }
}
