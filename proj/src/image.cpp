#include "relia/image.hpp"

#include "relia/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace relia {

namespace {

void check_shape(int width, int height, int channels)
{
    if (width <= 0 || height <= 0)
        throw ValidationError("image dimensions must be positive");
    if (channels != 1 && channels != 3)
        throw ValidationError("image must have 1 or 3 channels, got " + std::to_string(channels));
}

} // namespace

RasterImage::RasterImage(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels)
{
    check_shape(width, height, channels);
    if (!(fill >= 0.0f && fill <= 1.0f))
        throw ValidationError("pixel fill value outside [0,1]");
    pixels_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

RasterImage::RasterImage(int width, int height, int channels, std::vector<float> pixels)
    : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels))
{
    check_shape(width, height, channels);
    if (pixels_.size() != static_cast<std::size_t>(width) * height * channels)
        throw ValidationError("pixel buffer has " + std::to_string(pixels_.size()) +
                              " values, expected " +
                              std::to_string(static_cast<std::size_t>(width) * height * channels));
    for (float v : pixels_)
        if (!(v >= 0.0f && v <= 1.0f))
            throw ValidationError("pixel value outside [0,1]");
}

void write_pnm(const RasterImage& img, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << (img.channels() == 1 ? "P5" : "P6") << '\n'
        << img.width() << ' ' << img.height() << "\n255\n";
    std::string bytes(img.size(), '\0');
    for (std::size_t i = 0; i < img.size(); ++i)
        bytes[i] = static_cast<char>(std::lround(std::clamp(img.pixels()[i], 0.0f, 1.0f) * 255.0f));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

RasterImage read_pnm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    std::string magic;
    in >> magic;
    int channels = 0;
    if (magic == "P5")
        channels = 1;
    else if (magic == "P6")
        channels = 3;
    else
        throw ValidationError(path.string() + ": not a binary PGM/PPM file");

    auto next_int = [&]() {
        in >> std::ws;
        while (in.peek() == '#') {
            std::string comment;
            std::getline(in, comment);
            in >> std::ws;
        }
        int v = 0;
        if (!(in >> v))
            throw ValidationError(path.string() + ": malformed header");
        return v;
    };
    const int width = next_int();
    const int height = next_int();
    const int maxval = next_int();
    if (maxval <= 0 || maxval > 255)
        throw ValidationError(path.string() + ": only 8-bit maxval is supported");
    in.get();

    std::vector<unsigned char> bytes(static_cast<std::size_t>(width) * height * channels);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw ValidationError(path.string() + ": truncated pixel data");
    std::vector<float> pixels(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i)
        pixels[i] = static_cast<float>(bytes[i]) / static_cast<float>(maxval);
    return RasterImage(width, height, channels, std::move(pixels));
}

} // namespace relia
