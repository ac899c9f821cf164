#pragma once

#include "relia/image.hpp"
#include "relia/space.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace relia {

/// The black-box accuracy function over a search space.
///
/// Implementations must be deterministic: the same level always yields the
/// same value.
class Oracle {
public:
    explicit Oracle(SearchSpace space) : space_(std::move(space)) {}
    virtual ~Oracle() = default;

    const SearchSpace& space() const { return space_; }

    /// Checks the level against space(), evaluates it and checks that the
    /// result lies in [0,1]. Failures surface as OracleError carrying the
    /// offending level; out-of-space levels raise ValidationError.
    double evaluate(const DistortionLevel& level) const;

    virtual std::string describe() const = 0;

protected:
    virtual double evaluate_impl(const DistortionLevel& level) const = 0;

private:
    SearchSpace space_;
};

class OracleError : public std::runtime_error {
public:
    OracleError(const std::string& what, DistortionLevel level);
    const DistortionLevel& level() const { return level_; }

private:
    DistortionLevel level_;
};

// ---------------------------------------------------------------------------
// Images and reference classifiers

struct VerificationSet {
    std::vector<RasterImage> images;
    std::vector<int> labels;
    int num_classes = 0;

    std::size_t size() const { return images.size(); }
    /// Equal lengths, at least one image, one shared shape, labels in range.
    void validate() const;
};

class ImageClassifier {
public:
    virtual ~ImageClassifier() = default;
    virtual int predict(const RasterImage& img) const = 0;
    virtual bool accepts(const RasterImage& img) const = 0;
    virtual int num_classes() const = 0;
};

enum class ReferenceKind { nearest_centroid, knn };

ReferenceKind parse_reference_kind(const std::string& name);

/// Per-class mean pixel vectors; predicts the closest centroid (lowest class
/// index on ties).
class NearestCentroidClassifier : public ImageClassifier {
public:
    explicit NearestCentroidClassifier(const VerificationSet& train);
    int predict(const RasterImage& img) const override;
    bool accepts(const RasterImage& img) const override;
    int num_classes() const override { return static_cast<int>(centroids_.size()); }
    const std::vector<std::vector<double>>& centroids() const { return centroids_; }

private:
    int width_, height_, channels_;
    std::vector<std::vector<double>> centroids_;
};

/// Majority vote over the k Euclidean nearest training images; equal votes go
/// to the lowest class index.
class KnnImageClassifier : public ImageClassifier {
public:
    KnnImageClassifier(VerificationSet train, int k = 5);
    int predict(const RasterImage& img) const override;
    bool accepts(const RasterImage& img) const override;
    int num_classes() const override { return train_.num_classes; }

private:
    VerificationSet train_;
    int k_;
};

/// Throws ValidationError when a class below num_classes has no examples.
std::shared_ptr<ImageClassifier> train_reference_classifier(const VerificationSet& train,
                                                            ReferenceKind kind);

/// Procedural grayscale shapes with class-dependent geometry: horizontal bar,
/// vertical bar, disc, diagonal bar (in that class order). Each image gets
/// random offset, thickness, intensity and noise.
VerificationSet make_shape_dataset(std::size_t count, int num_classes, int size,
                                   std::uint64_t seed);

/// MNIST-style IDX files (unsigned byte payload, big-endian sizes). Pixels
/// are scaled to [0,1]. `limit` keeps the first images only (0 = all).
std::vector<RasterImage> read_idx_images(const std::filesystem::path& path, std::size_t limit = 0);
std::vector<int> read_idx_labels(const std::filesystem::path& path, std::size_t limit = 0);
VerificationSet load_idx_set(const std::filesystem::path& images, const std::filesystem::path& labels,
                             std::size_t limit = 0);

// ---------------------------------------------------------------------------
// Oracle implementations

/// Fraction of verification images the classifier gets right after
/// distorting the whole set at the queried level. The rain seed is fixed per
/// instance so the function is deterministic.
class ClassifierOracle : public Oracle {
public:
    ClassifierOracle(std::shared_ptr<const ImageClassifier> classifier, VerificationSet verification,
                     std::uint64_t rain_seed);
    std::string describe() const override;
    const VerificationSet& verification() const { return verification_; }

protected:
    double evaluate_impl(const DistortionLevel& level) const override;

private:
    std::shared_ptr<const ImageClassifier> classifier_;
    VerificationSet verification_;
    std::uint64_t rain_seed_;
};

std::shared_ptr<Oracle> make_classifier_oracle(std::shared_ptr<const ImageClassifier> classifier,
                                               VerificationSet verification,
                                               std::uint64_t rain_seed);

enum class SyntheticKind { box, ellipsoid, multimodal };

/// Gaussian-shaped bump peak * exp(-sum_j ((u_j - center_j) / scale_j)^2)
/// in unit-cube coordinates u.
struct Bump {
    double peak = 0.99;
    std::vector<double> center;
    std::vector<double> scales;
};

/// Closed-form accuracy surfaces with known positive regions. All geometry is
/// expressed in unit-cube coordinates of `space`.
struct SyntheticOracleSpec {
    SyntheticKind kind = SyntheticKind::ellipsoid;
    SearchSpace space = distortion_space();
    // box
    std::vector<double> box_lower, box_upper;
    double inside = 0.99;
    double outside = 0.5;
    // ellipsoid uses bumps[0]; multimodal takes the max over all bumps
    std::vector<Bump> bumps;
    /// Added to every bump surface (multimodal only), clamped to [0,1].
    double floor = 0.0;

    void validate() const;
};

class SyntheticOracle : public Oracle {
public:
    explicit SyntheticOracle(SyntheticOracleSpec spec);
    std::string describe() const override;
    const SyntheticOracleSpec& spec() const { return spec_; }

    /// Positive-region volume fraction under threshold h when it has a
    /// closed form (box always; ellipsoid when the region fits in the cube).
    std::optional<double> exact_positive_fraction(double h) const;
    /// exact_positive_fraction when available, otherwise a uniform Monte-Carlo
    /// estimate with `draws` points from a fixed seed.
    double positive_fraction(double h, std::size_t draws = 1'000'000) const;

protected:
    double evaluate_impl(const DistortionLevel& level) const override;

private:
    double value_at_unit(const std::vector<double>& u) const;
    SyntheticOracleSpec spec_;
};

std::shared_ptr<SyntheticOracle> make_synthetic_oracle(SyntheticOracleSpec spec);

/// Isotropic ellipsoid oracle over `space` whose region {f >= h} occupies
/// `fraction` of the box (centred at the cube midpoint).
SyntheticOracleSpec ellipsoid_with_fraction(const SearchSpace& space, double peak, double h,
                                            double fraction);

/// Standard benchmark: ellipsoid over the six distortion types, peak 0.99,
/// positive fraction 0.03 at h = 0.85.
SyntheticOracleSpec benchmark_oracle_spec();
inline constexpr double kBenchmarkThreshold = 0.85;

/// Memoizes an inner oracle by exact coordinates. Lookups and inner calls
/// are serialized under one mutex, so concurrent queries are safe and never
/// evaluate the same level twice.
class CachingOracle : public Oracle {
public:
    explicit CachingOracle(std::shared_ptr<const Oracle> inner);
    std::string describe() const override;

    /// Number of evaluations forwarded to the inner oracle.
    std::size_t inner_calls() const;
    std::size_t cache_size() const;

protected:
    double evaluate_impl(const DistortionLevel& level) const override;

private:
    std::shared_ptr<const Oracle> inner_;
    mutable std::mutex mutex_;
    mutable std::map<std::vector<double>, double> cache_;
    mutable std::size_t inner_calls_ = 0;
};

std::shared_ptr<CachingOracle> caching_oracle(std::shared_ptr<const Oracle> inner);

/// Reliability thresholds used as presets for the named datasets.
std::optional<double> threshold_preset(const std::string& dataset);
const std::map<std::string, double>& threshold_presets();

} // namespace relia
