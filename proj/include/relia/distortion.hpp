#pragma once

#include "relia/image.hpp"
#include "relia/space.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace relia {

/// Rain streak rendering constants.
struct RainStyle {
    static constexpr double density = 0.02; // streaks per pixel at rain = 1
    static constexpr float value = 0.85f;
    static constexpr float alpha = 0.6f;
    static constexpr double min_length = 8.0;
    static constexpr double max_length = 12.0;
    static constexpr double min_angle_deg = 70.0;
    static constexpr double max_angle_deg = 80.0;
};

/// Applies a level from distortion_space() in three stages:
///
///  1. Affine warp about the pixel centre ((w-1)/2, (h-1)/2): scale, then a
///     counter-clockwise rotation (as displayed, y pointing down) by the
///     given degrees, then a shift of (tx * width, ty * height) pixels.
///     Inverse mapping with bilinear sampling; pixels mapped from outside the
///     frame read as 0.
///  2. Darkness: multiply by the factor and clamp to [0,1].
///  3. Rain: round(rain * 0.02 * w * h) anti-aliased streaks placed by a
///     generator seeded with `rain_seed`.
///
/// Throws ValidationError naming the dimension when `level` is out of bounds.
RasterImage apply_distortion(const RasterImage& img, const DistortionLevel& level,
                             std::uint64_t rain_seed);

/// apply_distortion on each image with rain seed `rain_seed + index`.
std::vector<RasterImage> distort_set(std::span<const RasterImage> images,
                                     const DistortionLevel& level, std::uint64_t rain_seed);

// Individual stages, exposed for testing.
RasterImage affine_warp(const RasterImage& img, double scale, double rotation_deg, double tx,
                        double ty);
void apply_darkness(RasterImage& img, double factor);
void apply_rain(RasterImage& img, double intensity, std::uint64_t rain_seed);

} // namespace relia
