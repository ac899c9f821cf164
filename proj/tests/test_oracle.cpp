#include "relia/distortion.hpp"
#include "relia/error.hpp"
#include "relia/oracle.hpp"
#include "relia/rng.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

using namespace relia;

namespace {

class ConstantClassifier : public ImageClassifier {
public:
    explicit ConstantClassifier(int cls) : cls_(cls) {}
    int predict(const RasterImage&) const override { return cls_; }
    bool accepts(const RasterImage& img) const override { return img.width() == 8; }
    int num_classes() const override { return 2; }

private:
    int cls_;
};

// Predicts the class stored in the top-left pixel (value * 10).
class PixelClassifier : public ImageClassifier {
public:
    int predict(const RasterImage& img) const override
    {
        return static_cast<int>(std::lround(img.at(0, 0) * 10.0f));
    }
    bool accepts(const RasterImage&) const override { return true; }
    int num_classes() const override { return 3; }
};

class BrokenOracle : public Oracle {
public:
    BrokenOracle() : Oracle(distortion_space()) {}
    std::string describe() const override { return "broken"; }

protected:
    double evaluate_impl(const DistortionLevel&) const override { return 1.5; }
};

VerificationSet constant_classes(std::size_t n, int size)
{
    VerificationSet set;
    set.num_classes = 2;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        set.images.emplace_back(size, size, 1, label ? 0.9f : 0.1f);
        set.labels.push_back(label);
    }
    return set;
}

SyntheticOracleSpec box_spec(double volume)
{
    SyntheticOracleSpec spec;
    spec.kind = SyntheticKind::box;
    const double side = std::pow(volume, 1.0 / 6.0);
    spec.box_lower.assign(6, 0.2);
    spec.box_upper.assign(6, 0.2 + side);
    spec.inside = 0.99;
    spec.outside = 0.5;
    return spec;
}

} // namespace

TEST_CASE("constant predictor gives the class share at every level")
{
    VerificationSet set;
    set.num_classes = 2;
    for (int i = 0; i < 20; ++i) {
        set.images.emplace_back(8, 8, 1, 0.5f);
        set.labels.push_back(i < 6 ? 0 : 1);
    }
    const auto oracle = make_classifier_oracle(std::make_shared<ConstantClassifier>(0), set, 3);
    CHECK(oracle->evaluate(identity_level()) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(oracle->evaluate(DistortionLevel{{1.2, 45, 0.1, -0.1, 0.8, 0.7}}) ==
          doctest::Approx(0.3).epsilon(1e-15));

    VerificationSet wrong_shape = set;
    wrong_shape.images.assign(20, RasterImage(9, 9, 1));
    CHECK_THROWS_AS(make_classifier_oracle(std::make_shared<ConstantClassifier>(0), wrong_shape, 3),
                    ValidationError);
}

TEST_CASE("classifier oracle equals per-image enumeration")
{
    VerificationSet set;
    set.num_classes = 3;
    const int stored[10] = {0, 1, 2, 2, 1, 0, 0, 1, 2, 1};
    const int truth[10] = {0, 1, 1, 2, 0, 0, 2, 1, 2, 2};
    for (int i = 0; i < 10; ++i) {
        RasterImage img(6, 6, 1, 0.0f);
        img.at(0, 0) = static_cast<float>(stored[i]) / 10.0f;
        set.images.push_back(img);
        set.labels.push_back(truth[i]);
    }
    const auto pixel = std::make_shared<PixelClassifier>();
    const auto oracle = make_classifier_oracle(pixel, set, 0);
    int correct = 0;
    for (int i = 0; i < 10; ++i)
        correct += pixel->predict(set.images[static_cast<std::size_t>(i)]) == truth[i];
    CHECK(correct == 6);
    CHECK(oracle->evaluate(identity_level()) == doctest::Approx(correct / 10.0).epsilon(1e-15));

    // Under a real distortion, compare against distorting each image by hand.
    const DistortionLevel lvl{{1.1, 20, 0.05, 0.0, 0.9, 0.3}};
    const auto distorted = distort_set(set.images, lvl, 0);
    int hand = 0;
    for (int i = 0; i < 10; ++i)
        hand += pixel->predict(distorted[static_cast<std::size_t>(i)]) == truth[i];
    CHECK(oracle->evaluate(lvl) == doctest::Approx(hand / 10.0).epsilon(1e-15));
}

TEST_CASE("reference classifiers")
{
    const auto train = constant_classes(10, 8);
    const auto held_out = constant_classes(6, 8);
    for (auto kind : {ReferenceKind::nearest_centroid, ReferenceKind::knn}) {
        const auto clf = train_reference_classifier(train, kind);
        for (std::size_t i = 0; i < held_out.size(); ++i)
            CHECK(clf->predict(held_out.images[i]) == held_out.labels[i]);
        const auto oracle = make_classifier_oracle(clf, held_out, 1);
        CHECK(oracle->evaluate(identity_level()) == 1.0);
    }

    VerificationSet one_each;
    one_each.num_classes = 3;
    for (int c = 0; c < 3; ++c) {
        one_each.images.emplace_back(4, 4, 1, 0.2f + 0.3f * static_cast<float>(c));
        one_each.labels.push_back(c);
    }
    const auto nc = train_reference_classifier(one_each, ReferenceKind::nearest_centroid);
    for (int c = 0; c < 3; ++c)
        CHECK(nc->predict(one_each.images[static_cast<std::size_t>(c)]) == c);

    VerificationSet missing = one_each;
    missing.num_classes = 4;
    CHECK_THROWS_AS(train_reference_classifier(missing, ReferenceKind::knn), ValidationError);
    CHECK(parse_reference_kind("k-nn") == ReferenceKind::knn);
    CHECK_THROWS_AS(parse_reference_kind("svm"), ValidationError);
}

TEST_CASE("nearest centroid matches a brute-force distance computation")
{
    const auto train = make_shape_dataset(60, 3, 12, 4);
    const auto probes = make_shape_dataset(20, 3, 12, 5);
    const NearestCentroidClassifier clf(train);
    std::vector<std::vector<double>> mean(3, std::vector<double>(144, 0.0));
    std::vector<double> count(3, 0.0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto c = static_cast<std::size_t>(train.labels[i]);
        for (std::size_t p = 0; p < 144; ++p)
            mean[c][p] += train.images[i].pixels()[p];
        count[c] += 1.0;
    }
    for (std::size_t c = 0; c < 3; ++c)
        for (auto& v : mean[c])
            v /= count[c];
    for (const auto& img : probes.images) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int c = 0; c < 3; ++c) {
            double d = 0.0;
            for (std::size_t p = 0; p < 144; ++p) {
                const double z = img.pixels()[p] - mean[static_cast<std::size_t>(c)][p];
                d += z * z;
            }
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        CHECK(clf.predict(img) == best);
    }
}

TEST_CASE("knn image classifier breaks vote ties towards the lower class")
{
    VerificationSet set;
    set.num_classes = 2;
    // Two images per class at equal distance from a 0.5 probe.
    for (float v : {0.4f, 0.4f, 0.6f, 0.6f}) {
        set.images.emplace_back(2, 2, 1, v);
        set.labels.push_back(v > 0.5f ? 1 : 0);
    }
    const KnnImageClassifier clf(set, 4);
    CHECK(clf.predict(RasterImage(2, 2, 1, 0.5f)) == 0);
}

TEST_CASE("shape dataset")
{
    const auto a = make_shape_dataset(40, 4, 16, 9);
    const auto b = make_shape_dataset(40, 4, 16, 9);
    a.validate();
    CHECK(a.size() == 40);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.labels[i] == static_cast<int>(i % 4));
        CHECK(a.images[i] == b.images[i]);
    }
    CHECK_THROWS_AS(make_shape_dataset(10, 5, 16, 1), ValidationError);
    CHECK_THROWS_AS(make_shape_dataset(10, 2, 4, 1), ValidationError);
}

TEST_CASE("rotation degrades the nearest-centroid oracle")
{
    const auto train = make_shape_dataset(200, 2, 16, 21);
    const auto verify = make_shape_dataset(200, 2, 16, 22);
    const auto oracle = make_classifier_oracle(
        train_reference_classifier(train, ReferenceKind::nearest_centroid), verify, 0);
    auto rotated = identity_level();
    rotated.coords[dim::rotation] = 60.0;
    CHECK(oracle->evaluate(rotated) <= oracle->evaluate(identity_level()));
}

TEST_CASE("IDX reader")
{
    const auto dir = support::scratch_dir("idx");
    auto be32 = [](std::ofstream& o, std::uint32_t v) {
        const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                    static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
        o.write(reinterpret_cast<const char*>(b), 4);
    };
    {
        std::ofstream o(dir / "img", std::ios::binary);
        be32(o, 0x00000803);
        be32(o, 3);
        be32(o, 2);
        be32(o, 3);
        for (int i = 0; i < 18; ++i)
            o.put(static_cast<char>(i * 15));
        std::ofstream l(dir / "lbl", std::ios::binary);
        be32(l, 0x00000801);
        be32(l, 3);
        for (char c : {7, 0, 2})
            l.put(c);
    }
    const auto images = read_idx_images(dir / "img");
    REQUIRE(images.size() == 3);
    CHECK(images[0].width() == 3);
    CHECK(images[0].height() == 2);
    CHECK(images[1].at(2, 1) == doctest::Approx(11 * 15 / 255.0f));
    CHECK(read_idx_images(dir / "img", 2).size() == 2);
    CHECK(read_idx_labels(dir / "lbl") == std::vector<int>{7, 0, 2});
    const auto set = load_idx_set(dir / "img", dir / "lbl");
    CHECK(set.num_classes == 8);
    CHECK_THROWS_AS(read_idx_images(dir / "lbl"), ValidationError);
    CHECK_THROWS_AS(read_idx_images(dir / "missing"), ValidationError);
}

TEST_CASE("oracle contract checks")
{
    const auto ok = make_synthetic_oracle(benchmark_oracle_spec());
    CHECK_THROWS_AS(ok->evaluate(DistortionLevel{{1.0, 100, 0, 0, 1, 0}}), ValidationError);
    BrokenOracle broken;
    try {
        broken.evaluate(identity_level());
        FAIL("expected OracleError");
    } catch (const OracleError& e) {
        CHECK(e.level() == identity_level());
    }
}

TEST_CASE("box oracle")
{
    const auto oracle = make_synthetic_oracle(box_spec(0.03));
    CHECK(*oracle->exact_positive_fraction(0.9) == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(*oracle->exact_positive_fraction(0.4) == 1.0);
    CHECK(*oracle->exact_positive_fraction(0.995) == 0.0);
    // Monte-Carlo from an independent stream, 3 standard errors.
    Rng rng(77);
    const std::size_t n = 200000;
    std::size_t hits = 0;
    const auto space = distortion_space();
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> u(6);
        for (auto& v : u)
            v = rng.uniform();
        hits += oracle->evaluate(space.denormalize(u)) >= 0.9;
    }
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    CHECK(std::abs(p - 0.03) <= 3.0 * std::sqrt(0.03 * 0.97 / static_cast<double>(n)));

    auto bad = box_spec(0.03);
    bad.box_upper[2] = 0.1;
    CHECK_THROWS_AS(make_synthetic_oracle(bad), ValidationError);
}

TEST_CASE("benchmark ellipsoid")
{
    const auto spec = benchmark_oracle_spec();
    const auto oracle = make_synthetic_oracle(spec);
    const auto space = distortion_space();
    const auto& bump = spec.bumps.at(0);
    CHECK(oracle->evaluate(space.denormalize(bump.center)) == doctest::Approx(bump.peak).epsilon(1e-15));
    CHECK(oracle->evaluate(space.denormalize(bump.center)) == doctest::Approx(0.99).epsilon(1e-15));
    const double h = kBenchmarkThreshold;
    REQUIRE(oracle->exact_positive_fraction(h));
    CHECK(*oracle->exact_positive_fraction(h) == doctest::Approx(0.03).epsilon(1e-12));

    // Cell-centred 9-point grid per dimension.
    std::size_t inside = 0, total = 0;
    std::vector<int> idx(6, 0);
    std::vector<double> u(6);
    while (true) {
        for (std::size_t j = 0; j < 6; ++j)
            u[j] = (idx[j] + 0.5) / 9.0;
        double s = 0.0;
        for (std::size_t j = 0; j < 6; ++j) {
            const double z = (u[j] - bump.center[j]) / bump.scales[j];
            s += z * z;
        }
        inside += bump.peak * std::exp(-s) >= h;
        ++total;
        std::size_t j = 0;
        while (j < 6 && ++idx[j] == 9)
            idx[j++] = 0;
        if (j == 6)
            break;
    }
    CHECK(total == 531441);
    CHECK(std::abs(static_cast<double>(inside) / static_cast<double>(total) - 0.03) <= 0.005);

    // Monte-Carlo fallback path against the closed form, 3 standard errors.
    auto multi = spec;
    multi.kind = SyntheticKind::multimodal;
    const auto mc = make_synthetic_oracle(multi);
    CHECK(!mc->exact_positive_fraction(h));
    CHECK(std::abs(mc->positive_fraction(h) - 0.03) <= 3.0 * std::sqrt(0.03 * 0.97 / 1e6));
}

TEST_CASE("ellipsoid construction")
{
    const auto space = distortion_space();
    const auto spec = ellipsoid_with_fraction(space, 0.95, 0.7, 0.05);
    CHECK(*make_synthetic_oracle(spec)->exact_positive_fraction(0.7) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK_THROWS_AS(ellipsoid_with_fraction(space, 0.95, 0.7, 0.9), ValidationError);
    CHECK_THROWS_AS(ellipsoid_with_fraction(space, 0.95, 0.97, 0.03), ValidationError);
}

TEST_CASE("caching oracle")
{
    const auto inner = make_synthetic_oracle(benchmark_oracle_spec());
    const auto cache = caching_oracle(inner);
    const DistortionLevel a{{1.1, 10, 0, 0.05, 0.9, 0.2}};
    const double first = cache->evaluate(a);
    const double second = cache->evaluate(a);
    CHECK(first == second);
    CHECK(first == inner->evaluate(a));
    CHECK(cache->inner_calls() == 1);
    cache->evaluate(identity_level());
    CHECK(cache->inner_calls() == 2);
    CHECK(cache->cache_size() == 2);
}

TEST_CASE("threshold presets")
{
    CHECK(threshold_preset("CIFAR-10") == 0.85);
    CHECK(threshold_preset("MNIST") == 0.90);
    CHECK(threshold_preset("Tiny-ImageNet") == 0.45);
    CHECK(!threshold_preset("SVHN"));
    CHECK(threshold_presets().size() == 6);
}
