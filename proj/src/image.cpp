#include "strobevib/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "strobevib/error.hpp"

namespace strobevib {

void write_pgm(const Gray8& image, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P5\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& in) {
    std::string token;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            if (!token.empty()) break;
        } else {
            token.push_back(static_cast<char>(c));
        }
        c = in.get();
    }
    return token;
}

}  // namespace

Gray8 read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    if (pgm_token(in) != "P5") throw ConfigError("not a binary PGM", path.string());
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(pgm_token(in));
        h = std::stoi(pgm_token(in));
        maxval = std::stoi(pgm_token(in));
    } catch (const std::exception&) {
        throw ConfigError("malformed PGM header", path.string());
    }
    if (w <= 0 || h <= 0 || maxval != 255) throw ConfigError("unsupported PGM geometry", path.string());
    Gray8 image(w, h);
    in.read(reinterpret_cast<char*>(image.pixels.data()), static_cast<std::streamsize>(image.size()));
    if (in.gcount() != static_cast<std::streamsize>(image.size())) {
        throw ConfigError("truncated PGM payload", path.string());
    }
    return image;
}

Plane to_plane(const Gray8& image, float scale) {
    Plane out(image.width, image.height);
    for (std::size_t i = 0; i < image.size(); ++i) out.pixels[i] = image.pixels[i] * scale;
    return out;
}

Plane gaussian_blur(const Plane& src, float sigma) {
    if (sigma <= 0.0f) return src;
    const int r = std::max(1, static_cast<int>(std::ceil(3.0f * sigma)));
    std::vector<float> kernel(2 * r + 1);
    float sum = 0.0f;
    for (int i = -r; i <= r; ++i) {
        kernel[i + r] = std::exp(-0.5f * i * i / (sigma * sigma));
        sum += kernel[i + r];
    }
    for (float& k : kernel) k /= sum;

    const int w = src.width, h = src.height;
    Plane tmp(w, h);
    for (int y = 0; y < h; ++y) {
        const float* row = &src.pixels[static_cast<std::size_t>(y) * w];
        for (int x = 0; x < w; ++x) {
            float acc = 0.0f;
            if (x >= r && x + r < w) {
                for (int i = -r; i <= r; ++i) acc += kernel[i + r] * row[x + i];
            } else {
                for (int i = -r; i <= r; ++i) acc += kernel[i + r] * row[std::clamp(x + i, 0, w - 1)];
            }
            tmp.at(x, y) = acc;
        }
    }
    Plane out(w, h);
    for (int y = 0; y < h; ++y) {
        float* dst = &out.pixels[static_cast<std::size_t>(y) * w];
        for (int i = -r; i <= r; ++i) {
            const float* row = &tmp.pixels[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w];
            const float k = kernel[i + r];
            for (int x = 0; x < w; ++x) dst[x] += k * row[x];
        }
    }
    return out;
}

Plane box_sum(const Plane& src, int radius) {
    const int w = src.width, h = src.height;
    // Summed-area table in double to keep large frames exact enough.
    std::vector<double> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
    auto s = [&](int x, int y) -> double& { return sat[static_cast<std::size_t>(y) * (w + 1) + x]; };
    for (int y = 0; y < h; ++y) {
        double row = 0.0;
        for (int x = 0; x < w; ++x) {
            row += src.at(x, y);
            s(x + 1, y + 1) = s(x + 1, y) + row;
        }
    }
    Plane out(w, h);
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - radius), y1 = std::min(h, y + radius + 1);
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(0, x - radius), x1 = std::min(w, x + radius + 1);
            out.at(x, y) = static_cast<float>(s(x1, y1) - s(x0, y1) - s(x1, y0) + s(x0, y0));
        }
    }
    return out;
}

float sample_bilinear(const Plane& src, float x, float y) {
    x = std::clamp(x, 0.0f, static_cast<float>(src.width - 1));
    y = std::clamp(y, 0.0f, static_cast<float>(src.height - 1));
    const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, src.width - 1), y1 = std::min(y0 + 1, src.height - 1);
    const float fx = x - x0, fy = y - y0;
    const float top = src.at(x0, y0) * (1 - fx) + src.at(x1, y0) * fx;
    const float bottom = src.at(x0, y1) * (1 - fx) + src.at(x1, y1) * fx;
    return top * (1 - fy) + bottom * fy;
}

}  // namespace strobevib
