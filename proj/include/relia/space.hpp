#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace relia {

/// One distortion type with its closed domain.
struct Dimension {
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
};

/// A point in the search space, one coordinate per distortion type.
struct DistortionLevel {
    std::vector<double> coords;

    std::size_t dim() const { return coords.size(); }
    bool operator==(const DistortionLevel&) const = default;
};

/// Ordered box of distortion dimensions.
class SearchSpace {
public:
    /// Throws ValidationError when empty, when a name repeats, or when any
    /// lower >= upper.
    explicit SearchSpace(std::vector<Dimension> dims);

    std::size_t dim() const { return dims_.size(); }
    const std::vector<Dimension>& dims() const { return dims_; }
    const Dimension& operator[](std::size_t i) const { return dims_[i]; }
    std::size_t index_of(const std::string& name) const;

    bool contains(const DistortionLevel& level) const;
    /// Throws ValidationError naming the first dimension that is out of bounds
    /// or the dimension count when it differs.
    void check(const DistortionLevel& level) const;

    /// Maps a level onto the unit cube.
    std::vector<double> normalize(const DistortionLevel& level) const;
    DistortionLevel denormalize(const std::vector<double>& unit) const;
    DistortionLevel clamp(DistortionLevel level) const;

    bool operator==(const SearchSpace&) const;

private:
    std::vector<Dimension> dims_;
};

/// The six distortion types and their domains: scale, rotation (degrees),
/// horizontal and vertical translation (fraction of the image size),
/// darkness factor and rain intensity.
SearchSpace distortion_space();

namespace dim {
inline constexpr std::size_t scale = 0;
inline constexpr std::size_t rotation = 1;
inline constexpr std::size_t translate_x = 2;
inline constexpr std::size_t translate_y = 3;
inline constexpr std::size_t darkness = 4;
inline constexpr std::size_t rain = 5;
} // namespace dim

/// Level at which every distortion stage is a no-op.
DistortionLevel identity_level();

} // namespace relia
