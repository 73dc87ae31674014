#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace splat4d {

/// H x W x 3 image, doubles in [0,1], row-major with interleaved channels.
class Image {
public:
    Image() = default;
    Image(int height, int width, double fill = 0.0)
        : height_(height), width_(width),
          data_(static_cast<size_t>(height) * width * 3, fill) {}

    int height() const { return height_; }
    int width() const { return width_; }

    double& at(int y, int x, int c) {
        return data_[(static_cast<size_t>(y) * width_ + x) * 3 + c];
    }
    double at(int y, int x, int c) const {
        return data_[(static_cast<size_t>(y) * width_ + x) * 3 + c];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    size_t size() const { return data_.size(); }

    bool same_shape(const Image& o) const {
        return height_ == o.height_ && width_ == o.width_;
    }

private:
    int height_ = 0, width_ = 0;
    std::vector<double> data_;
};

/// Binary mask, one byte per pixel (0 or 1).
struct Mask {
    int height = 0, width = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w, 0) {}
    std::uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const {
        return data[static_cast<size_t>(y) * width + x];
    }
    size_t count() const;
};

/// Quantize to 8 bits: round(clamp01(v) * 255).
std::uint8_t quantize8(double v);

/// Map an image through quantize8 (the dataset's storage precision).
Image quantized(const Image& im);

/// Binary PPM (P6). Values quantized with quantize8 on write.
void write_ppm(const Image& im, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

/// Binary PGM (P5) for masks (0 or 255 on disk).
void write_pgm(const Mask& m, const std::filesystem::path& path);
Mask read_pgm(const std::filesystem::path& path);

} // namespace splat4d
