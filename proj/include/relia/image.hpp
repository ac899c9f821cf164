#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace relia {

/// Row-major raster with 1 or 3 interleaved channels, values in [0,1].
class RasterImage {
public:
    RasterImage() = default;
    RasterImage(int width, int height, int channels, float fill = 0.0f);
    RasterImage(int width, int height, int channels, std::vector<float> pixels);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    std::size_t size() const { return pixels_.size(); }

    float& at(int x, int y, int c = 0)
    {
        return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    float at(int x, int y, int c = 0) const
    {
        return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    const std::vector<float>& pixels() const { return pixels_; }
    std::vector<float>& pixels() { return pixels_; }

    bool same_shape(const RasterImage& other) const
    {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }
    bool operator==(const RasterImage&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 1;
    std::vector<float> pixels_;
};

/// Binary PGM (P5) for one channel, PPM (P6) for three; 8-bit.
void write_pnm(const RasterImage& img, const std::filesystem::path& path);
RasterImage read_pnm(const std::filesystem::path& path);

} // namespace relia
