#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace strobevib {

/// Row-major image. Gray8 for captured frames and label maps, Plane for
/// intermediate float buffers.
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    std::vector<T> pixels;

    Image() = default;
    Image(int w, int h, T fill = T{}) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

    T& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    const T& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
    bool same_size(const auto& other) const { return width == other.width && height == other.height; }
    std::size_t size() const { return pixels.size(); }

    friend bool operator==(const Image&, const Image&) = default;
};

using Gray8 = Image<std::uint8_t>;
using Plane = Image<float>;

/// Binary PGM (P5, maxval 255).
void write_pgm(const Gray8& image, const std::filesystem::path& path);
Gray8 read_pgm(const std::filesystem::path& path);

Plane to_plane(const Gray8& image, float scale = 1.0f / 255.0f);

/// Separable Gaussian blur with edge clamping.
Plane gaussian_blur(const Plane& src, float sigma);

/// Sum over the (2r+1)x(2r+1) window centered on each pixel, edges clamped to
/// the valid part of the window.
Plane box_sum(const Plane& src, int radius);

/// Bilinear sample with edge clamping.
float sample_bilinear(const Plane& src, float x, float y);

}  // namespace strobevib
