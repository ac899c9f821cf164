#include "relia/oracle.hpp"

#include "relia/distortion.hpp"
#include "relia/error.hpp"
#include "relia/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace relia {

double Oracle::evaluate(const DistortionLevel& level) const
{
    space_.check(level);
    double value = 0.0;
    try {
        value = evaluate_impl(level);
    } catch (const OracleError&) {
        throw;
    } catch (const std::exception& e) {
        throw OracleError(e.what(), level);
    }
    if (!(value >= 0.0 && value <= 1.0))
        throw OracleError("oracle returned " + std::to_string(value) + ", outside [0,1]", level);
    return value;
}

namespace {

std::string format_level(const DistortionLevel& level)
{
    std::ostringstream out;
    out << '(';
    for (std::size_t i = 0; i < level.dim(); ++i)
        out << (i ? ", " : "") << level.coords[i];
    out << ')';
    return out.str();
}

} // namespace

OracleError::OracleError(const std::string& what, DistortionLevel level)
    : std::runtime_error("oracle failed at " + format_level(level) + ": " + what),
      level_(std::move(level))
{
}

// ---------------------------------------------------------------------------

void VerificationSet::validate() const
{
    if (images.empty())
        throw ValidationError("verification set is empty");
    if (images.size() != labels.size())
        throw ValidationError("verification set has " + std::to_string(images.size()) +
                              " images but " + std::to_string(labels.size()) + " labels");
    if (num_classes < 1)
        throw ValidationError("verification set needs at least one class");
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (!images[i].same_shape(images[0]))
            throw ValidationError("image " + std::to_string(i) + " has a different shape");
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw ValidationError("label " + std::to_string(labels[i]) + " of image " +
                                  std::to_string(i) + " is not below class count " +
                                  std::to_string(num_classes));
    }
}

ReferenceKind parse_reference_kind(const std::string& name)
{
    if (name == "nearest-centroid")
        return ReferenceKind::nearest_centroid;
    if (name == "knn" || name == "k-nn")
        return ReferenceKind::knn;
    throw ValidationError("unknown reference classifier '" + name + "'");
}

namespace {

double squared_distance(const std::vector<float>& a, const std::vector<double>& b)
{
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sq += d * d;
    }
    return sq;
}

double squared_distance(const std::vector<float>& a, const std::vector<float>& b)
{
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        sq += d * d;
    }
    return sq;
}

void require_every_class(const VerificationSet& train)
{
    train.validate();
    std::vector<std::size_t> counts(static_cast<std::size_t>(train.num_classes), 0);
    for (int label : train.labels)
        ++counts[static_cast<std::size_t>(label)];
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] == 0)
            throw ValidationError("class " + std::to_string(c) + " has no training examples");
}

} // namespace

NearestCentroidClassifier::NearestCentroidClassifier(const VerificationSet& train)
{
    require_every_class(train);
    const auto& first = train.images.front();
    width_ = first.width();
    height_ = first.height();
    channels_ = first.channels();
    centroids_.assign(static_cast<std::size_t>(train.num_classes),
                      std::vector<double>(first.size(), 0.0));
    std::vector<std::size_t> counts(centroids_.size(), 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        auto& centroid = centroids_[static_cast<std::size_t>(train.labels[i])];
        const auto& px = train.images[i].pixels();
        for (std::size_t p = 0; p < px.size(); ++p)
            centroid[p] += px[p];
        ++counts[static_cast<std::size_t>(train.labels[i])];
    }
    for (std::size_t c = 0; c < centroids_.size(); ++c)
        for (double& v : centroids_[c])
            v /= static_cast<double>(counts[c]);
}

bool NearestCentroidClassifier::accepts(const RasterImage& img) const
{
    return img.width() == width_ && img.height() == height_ && img.channels() == channels_;
}

int NearestCentroidClassifier::predict(const RasterImage& img) const
{
    if (!accepts(img))
        throw ValidationError("image shape does not match the classifier");
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids_.size(); ++c) {
        const double d = squared_distance(img.pixels(), centroids_[c]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

KnnImageClassifier::KnnImageClassifier(VerificationSet train, int k)
    : train_(std::move(train)), k_(k)
{
    require_every_class(train_);
    if (k_ < 1)
        throw ValidationError("k must be positive");
}

bool KnnImageClassifier::accepts(const RasterImage& img) const
{
    return img.same_shape(train_.images.front());
}

int KnnImageClassifier::predict(const RasterImage& img) const
{
    if (!accepts(img))
        throw ValidationError("image shape does not match the classifier");
    std::vector<std::pair<double, std::size_t>> dist(train_.size());
    for (std::size_t i = 0; i < train_.size(); ++i)
        dist[i] = {squared_distance(img.pixels(), train_.images[i].pixels()), i};
    const std::size_t k = std::min(static_cast<std::size_t>(k_), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<int> votes(static_cast<std::size_t>(train_.num_classes), 0);
    for (std::size_t i = 0; i < k; ++i)
        ++votes[static_cast<std::size_t>(train_.labels[dist[i].second])];
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

std::shared_ptr<ImageClassifier> train_reference_classifier(const VerificationSet& train,
                                                            ReferenceKind kind)
{
    switch (kind) {
    case ReferenceKind::nearest_centroid:
        return std::make_shared<NearestCentroidClassifier>(train);
    case ReferenceKind::knn:
        return std::make_shared<KnnImageClassifier>(train, 5);
    }
    throw ValidationError("unknown reference classifier kind");
}

VerificationSet make_shape_dataset(std::size_t count, int num_classes, int size, std::uint64_t seed)
{
    if (num_classes < 2 || num_classes > 4)
        throw ValidationError("shape dataset supports 2 to 4 classes");
    if (size < 8)
        throw ValidationError("shape images need at least 8x8 pixels");
    Rng rng(seed);
    VerificationSet set;
    set.num_classes = num_classes;
    const double mid = (size - 1) / 2.0;
    for (std::size_t i = 0; i < count; ++i) {
        const int label = static_cast<int>(i % static_cast<std::size_t>(num_classes));
        const double ox = mid + rng.uniform(-2.0, 2.0);
        const double oy = mid + rng.uniform(-2.0, 2.0);
        const double half = rng.uniform(1.0, 2.0);
        const double extent = size * rng.uniform(0.3, 0.4);
        const double intensity = rng.uniform(0.7, 1.0);

        RasterImage img(size, size, 1, 0.0f);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                const double dx = x - ox;
                const double dy = y - oy;
                bool on = false;
                switch (label) {
                case 0: on = std::abs(dy) <= half && std::abs(dx) <= extent; break;
                case 1: on = std::abs(dx) <= half && std::abs(dy) <= extent; break;
                case 2: on = std::hypot(dx, dy) <= 0.6 * extent; break;
                default:
                    on = std::abs(dx - dy) / std::numbers::sqrt2 <= half &&
                         std::abs(dx + dy) / std::numbers::sqrt2 <= extent;
                    break;
                }
                const double noise = rng.uniform(0.0, 0.1);
                img.at(x, y) = static_cast<float>(on ? std::min(1.0, intensity + noise) : noise);
            }
        }
        set.images.push_back(std::move(img));
        set.labels.push_back(label);
    }
    return set;
}

namespace {

std::vector<std::uint32_t> read_idx_header(std::ifstream& in, const std::filesystem::path& path,
                                           int expected_dims)
{
    unsigned char magic[4] = {};
    in.read(reinterpret_cast<char*>(magic), 4);
    if (!in || magic[0] != 0 || magic[1] != 0)
        throw ValidationError(path.string() + ": not an IDX file");
    if (magic[2] != 0x08)
        throw ValidationError(path.string() + ": only unsigned-byte IDX payloads are supported");
    if (magic[3] != expected_dims)
        throw ValidationError(path.string() + ": expected " + std::to_string(expected_dims) +
                              " dimensions, found " + std::to_string(magic[3]));
    std::vector<std::uint32_t> dims(static_cast<std::size_t>(expected_dims));
    for (auto& d : dims) {
        unsigned char b[4] = {};
        in.read(reinterpret_cast<char*>(b), 4);
        if (!in)
            throw ValidationError(path.string() + ": truncated header");
        d = (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
            std::uint32_t{b[3]};
    }
    return dims;
}

} // namespace

std::vector<RasterImage> read_idx_images(const std::filesystem::path& path, std::size_t limit)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open " + path.string());
    const auto dims = read_idx_header(in, path, 3);
    std::size_t count = dims[0];
    if (limit > 0)
        count = std::min(count, limit);
    const int rows = static_cast<int>(dims[1]);
    const int cols = static_cast<int>(dims[2]);
    std::vector<unsigned char> buffer(static_cast<std::size_t>(rows) * cols);
    std::vector<RasterImage> images;
    images.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
        if (!in)
            throw ValidationError(path.string() + ": truncated image data");
        std::vector<float> px(buffer.size());
        for (std::size_t p = 0; p < buffer.size(); ++p)
            px[p] = static_cast<float>(buffer[p]) / 255.0f;
        images.emplace_back(cols, rows, 1, std::move(px));
    }
    return images;
}

std::vector<int> read_idx_labels(const std::filesystem::path& path, std::size_t limit)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open " + path.string());
    const auto dims = read_idx_header(in, path, 1);
    std::size_t count = dims[0];
    if (limit > 0)
        count = std::min(count, limit);
    std::vector<unsigned char> bytes(count);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count));
    if (!in)
        throw ValidationError(path.string() + ": truncated label data");
    return {bytes.begin(), bytes.end()};
}

VerificationSet load_idx_set(const std::filesystem::path& images, const std::filesystem::path& labels,
                             std::size_t limit)
{
    VerificationSet set;
    set.images = read_idx_images(images, limit);
    set.labels = read_idx_labels(labels, limit);
    int max_label = 0;
    for (int l : set.labels)
        max_label = std::max(max_label, l);
    set.num_classes = max_label + 1;
    set.validate();
    return set;
}

// ---------------------------------------------------------------------------

ClassifierOracle::ClassifierOracle(std::shared_ptr<const ImageClassifier> classifier,
                                   VerificationSet verification, std::uint64_t rain_seed)
    : Oracle(distortion_space()), classifier_(std::move(classifier)),
      verification_(std::move(verification)), rain_seed_(rain_seed)
{
    if (!classifier_)
        throw ValidationError("classifier oracle needs a classifier");
    verification_.validate();
    if (!classifier_->accepts(verification_.images.front()))
        throw ValidationError("classifier does not accept the verification image shape");
}

std::string ClassifierOracle::describe() const
{
    return "classifier oracle over " + std::to_string(verification_.size()) + " images";
}

double ClassifierOracle::evaluate_impl(const DistortionLevel& level) const
{
    const auto distorted = distort_set(verification_.images, level, rain_seed_);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < distorted.size(); ++i)
        if (classifier_->predict(distorted[i]) == verification_.labels[i])
            ++correct;
    return static_cast<double>(correct) / static_cast<double>(distorted.size());
}

std::shared_ptr<Oracle> make_classifier_oracle(std::shared_ptr<const ImageClassifier> classifier,
                                               VerificationSet verification,
                                               std::uint64_t rain_seed)
{
    return std::make_shared<ClassifierOracle>(std::move(classifier), std::move(verification),
                                              rain_seed);
}

// ---------------------------------------------------------------------------

namespace {

double unit_ball_volume(std::size_t d)
{
    const double half = static_cast<double>(d) / 2.0;
    return std::pow(std::numbers::pi, half) / std::tgamma(half + 1.0);
}

void validate_bump(const Bump& b, std::size_t d)
{
    if (!(b.peak > 0.0 && b.peak <= 1.0))
        throw ValidationError("bump peak must lie in (0,1]");
    if (b.center.size() != d || b.scales.size() != d)
        throw ValidationError("bump center/scales must have " + std::to_string(d) + " entries");
    for (double s : b.scales)
        if (!(s > 0.0))
            throw ValidationError("bump scales must be positive");
}

} // namespace

void SyntheticOracleSpec::validate() const
{
    const std::size_t d = space.dim();
    switch (kind) {
    case SyntheticKind::box:
        if (box_lower.size() != d || box_upper.size() != d)
            throw ValidationError("box bounds must have " + std::to_string(d) + " entries");
        for (std::size_t j = 0; j < d; ++j)
            if (!(0.0 <= box_lower[j] && box_lower[j] < box_upper[j] && box_upper[j] <= 1.0))
                throw ValidationError("box bounds must satisfy 0 <= lower < upper <= 1");
        if (!(inside >= 0.0 && inside <= 1.0 && outside >= 0.0 && outside <= 1.0))
            throw ValidationError("box values must lie in [0,1]");
        break;
    case SyntheticKind::ellipsoid:
        if (bumps.size() != 1)
            throw ValidationError("ellipsoid oracle needs exactly one bump");
        validate_bump(bumps[0], d);
        break;
    case SyntheticKind::multimodal:
        if (bumps.empty())
            throw ValidationError("multimodal oracle needs at least one bump");
        for (const auto& b : bumps)
            validate_bump(b, d);
        if (!(floor >= 0.0 && floor <= 1.0))
            throw ValidationError("multimodal floor must lie in [0,1]");
        break;
    }
}

SyntheticOracle::SyntheticOracle(SyntheticOracleSpec spec) : Oracle(spec.space), spec_(std::move(spec))
{
    spec_.validate();
}

std::string SyntheticOracle::describe() const
{
    switch (spec_.kind) {
    case SyntheticKind::box: return "synthetic box oracle";
    case SyntheticKind::ellipsoid: return "synthetic ellipsoid oracle";
    case SyntheticKind::multimodal:
        return "synthetic multimodal oracle (" + std::to_string(spec_.bumps.size()) + " bumps)";
    }
    return "synthetic oracle";
}

double SyntheticOracle::value_at_unit(const std::vector<double>& u) const
{
    auto bump_value = [&](const Bump& b) {
        double sq = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) {
            const double z = (u[j] - b.center[j]) / b.scales[j];
            sq += z * z;
        }
        return b.peak * std::exp(-sq);
    };
    switch (spec_.kind) {
    case SyntheticKind::box: {
        for (std::size_t j = 0; j < u.size(); ++j)
            if (u[j] < spec_.box_lower[j] || u[j] > spec_.box_upper[j])
                return spec_.outside;
        return spec_.inside;
    }
    case SyntheticKind::ellipsoid:
        return bump_value(spec_.bumps[0]);
    case SyntheticKind::multimodal: {
        double best = 0.0;
        for (const auto& b : spec_.bumps)
            best = std::max(best, bump_value(b));
        return std::clamp(spec_.floor + best, 0.0, 1.0);
    }
    }
    return 0.0;
}

double SyntheticOracle::evaluate_impl(const DistortionLevel& level) const
{
    return value_at_unit(space().normalize(level));
}

std::optional<double> SyntheticOracle::exact_positive_fraction(double h) const
{
    const std::size_t d = space().dim();
    if (spec_.kind == SyntheticKind::box) {
        double volume = 1.0;
        for (std::size_t j = 0; j < d; ++j)
            volume *= spec_.box_upper[j] - spec_.box_lower[j];
        return (spec_.inside >= h ? volume : 0.0) + (spec_.outside >= h ? 1.0 - volume : 0.0);
    }
    if (spec_.kind == SyntheticKind::ellipsoid) {
        const Bump& b = spec_.bumps[0];
        if (h <= 0.0)
            return 1.0;
        if (h > b.peak)
            return 0.0;
        const double radius = std::sqrt(std::log(b.peak / h));
        double axes = 1.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double semi = radius * b.scales[j];
            if (b.center[j] - semi < 0.0 || b.center[j] + semi > 1.0)
                return std::nullopt;
            axes *= b.scales[j];
        }
        return unit_ball_volume(d) * std::pow(radius, static_cast<double>(d)) * axes;
    }
    return std::nullopt;
}

double SyntheticOracle::positive_fraction(double h, std::size_t draws) const
{
    if (auto exact = exact_positive_fraction(h))
        return *exact;
    Rng rng(0x5eed);
    std::vector<double> u(space().dim());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < draws; ++i) {
        for (auto& v : u)
            v = rng.uniform();
        if (value_at_unit(u) >= h)
            ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(draws);
}

std::shared_ptr<SyntheticOracle> make_synthetic_oracle(SyntheticOracleSpec spec)
{
    return std::make_shared<SyntheticOracle>(std::move(spec));
}

SyntheticOracleSpec ellipsoid_with_fraction(const SearchSpace& space, double peak, double h,
                                            double fraction)
{
    if (!(h > 0.0 && h < peak))
        throw ValidationError("ellipsoid threshold must lie in (0, peak)");
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ValidationError("positive fraction must lie in (0,1)");
    const std::size_t d = space.dim();
    const double radius = std::sqrt(std::log(peak / h));
    const double axes_product =
        fraction / (unit_ball_volume(d) * std::pow(radius, static_cast<double>(d)));
    const double scale = std::pow(axes_product, 1.0 / static_cast<double>(d));
    if (radius * scale > 0.5)
        throw ValidationError("requested positive fraction does not fit inside the search box");

    SyntheticOracleSpec spec;
    spec.kind = SyntheticKind::ellipsoid;
    spec.space = space;
    spec.bumps = {Bump{peak, std::vector<double>(d, 0.5), std::vector<double>(d, scale)}};
    return spec;
}

SyntheticOracleSpec benchmark_oracle_spec()
{
    return ellipsoid_with_fraction(distortion_space(), 0.99, kBenchmarkThreshold, 0.03);
}

// ---------------------------------------------------------------------------

CachingOracle::CachingOracle(std::shared_ptr<const Oracle> inner)
    : Oracle(inner ? inner->space() : distortion_space()), inner_(std::move(inner))
{
    if (!inner_)
        throw ValidationError("caching oracle needs an inner oracle");
}

std::string CachingOracle::describe() const
{
    return "cached " + inner_->describe();
}

std::size_t CachingOracle::inner_calls() const
{
    std::lock_guard lock(mutex_);
    return inner_calls_;
}

std::size_t CachingOracle::cache_size() const
{
    std::lock_guard lock(mutex_);
    return cache_.size();
}

double CachingOracle::evaluate_impl(const DistortionLevel& level) const
{
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(level.coords); it != cache_.end())
        return it->second;
    const double value = inner_->evaluate(level);
    ++inner_calls_;
    cache_.emplace(level.coords, value);
    return value;
}

std::shared_ptr<CachingOracle> caching_oracle(std::shared_ptr<const Oracle> inner)
{
    return std::make_shared<CachingOracle>(std::move(inner));
}

// ---------------------------------------------------------------------------

const std::map<std::string, double>& threshold_presets()
{
    static const std::map<std::string, double> presets = {
        {"MNIST", 0.90},    {"Fashion", 0.75},       {"CIFAR-10", 0.85},
        {"CIFAR-100", 0.65}, {"Tiny-ImageNet", 0.45}, {"ImageNette", 0.70},
    };
    return presets;
}

std::optional<double> threshold_preset(const std::string& dataset)
{
    const auto& presets = threshold_presets();
    if (auto it = presets.find(dataset); it != presets.end())
        return it->second;
    return std::nullopt;
}

} // namespace relia
