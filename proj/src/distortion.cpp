#include "relia/distortion.hpp"

#include "relia/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace relia {

namespace {

// Removes the rounding noise of trigonometric values at right angles so that
// quarter turns sample pixel centres exactly.
double snap(double v)
{
    const double r = std::round(v);
    return std::abs(v - r) < 1e-9 ? r : v;
}

double distance_to_segment(double px, double py, double ax, double ay, double bx, double by)
{
    const double vx = bx - ax;
    const double vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (ax + t * vx);
    const double dy = py - (ay + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

} // namespace

RasterImage affine_warp(const RasterImage& img, double scale, double rotation_deg, double tx,
                        double ty)
{
    const int w = img.width();
    const int h = img.height();
    const int channels = img.channels();
    const double cx = (w - 1) / 2.0;
    const double cy = (h - 1) / 2.0;
    const double theta = rotation_deg * std::numbers::pi / 180.0;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    const double shift_x = tx * w;
    const double shift_y = ty * h;

    RasterImage out(w, h, channels, 0.0f);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double dx = x - cx - shift_x;
            const double dy = y - cy - shift_y;
            const double sx = snap(cx + (dx * cos_t - dy * sin_t) / scale);
            const double sy = snap(cy + (dx * sin_t + dy * cos_t) / scale);

            const double fx = std::floor(sx);
            const double fy = std::floor(sy);
            const double ax = sx - fx;
            const double ay = sy - fy;
            const int x0 = static_cast<int>(fx);
            const int y0 = static_cast<int>(fy);
            const double weights[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
            const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
            const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
            for (int c = 0; c < channels; ++c) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k) {
                    if (weights[k] == 0.0 || xs[k] < 0 || xs[k] >= w || ys[k] < 0 || ys[k] >= h)
                        continue;
                    acc += weights[k] * img.at(xs[k], ys[k], c);
                }
                out.at(x, y, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
            }
        }
    }
    return out;
}

void apply_darkness(RasterImage& img, double factor)
{
    for (float& v : img.pixels())
        v = static_cast<float>(std::clamp(v * factor, 0.0, 1.0));
}

void apply_rain(RasterImage& img, double intensity, std::uint64_t rain_seed)
{
    const int w = img.width();
    const int h = img.height();
    const auto streaks =
        static_cast<long>(std::lround(intensity * RainStyle::density * static_cast<double>(w) * h));
    if (streaks <= 0)
        return;

    Rng rng(rain_seed);
    for (long s = 0; s < streaks; ++s) {
        const double x0 = rng.uniform(0.0, w);
        const double y0 = rng.uniform(0.0, h);
        const double length = rng.uniform(RainStyle::min_length, RainStyle::max_length);
        const double angle =
            rng.uniform(RainStyle::min_angle_deg, RainStyle::max_angle_deg) * std::numbers::pi / 180.0;
        const double x1 = x0 + length * std::cos(angle);
        const double y1 = y0 + length * std::sin(angle);

        const int xmin = std::max(0, static_cast<int>(std::floor(std::min(x0, x1))) - 1);
        const int xmax = std::min(w - 1, static_cast<int>(std::ceil(std::max(x0, x1))) + 1);
        const int ymin = std::max(0, static_cast<int>(std::floor(std::min(y0, y1))) - 1);
        const int ymax = std::min(h - 1, static_cast<int>(std::ceil(std::max(y0, y1))) + 1);
        for (int y = ymin; y <= ymax; ++y) {
            for (int x = xmin; x <= xmax; ++x) {
                const double cov = 1.0 - distance_to_segment(x, y, x0, y0, x1, y1);
                if (cov <= 0.0)
                    continue;
                const double a = RainStyle::alpha * cov;
                for (int c = 0; c < img.channels(); ++c) {
                    float& v = img.at(x, y, c);
                    v = static_cast<float>(
                        std::clamp(v * (1.0 - a) + RainStyle::value * a, 0.0, 1.0));
                }
            }
        }
    }
}

RasterImage apply_distortion(const RasterImage& img, const DistortionLevel& level,
                             std::uint64_t rain_seed)
{
    static const SearchSpace space = distortion_space();
    space.check(level);
    const auto& c = level.coords;
    RasterImage out = affine_warp(img, c[dim::scale], c[dim::rotation], c[dim::translate_x],
                                  c[dim::translate_y]);
    apply_darkness(out, c[dim::darkness]);
    apply_rain(out, c[dim::rain], rain_seed);
    return out;
}

std::vector<RasterImage> distort_set(std::span<const RasterImage> images,
                                     const DistortionLevel& level, std::uint64_t rain_seed)
{
    std::vector<RasterImage> out;
    out.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i)
        out.push_back(apply_distortion(images[i], level, rain_seed + i));
    return out;
}

} // namespace relia
