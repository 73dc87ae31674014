#include "splat4d/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "splat4d/errors.hpp"

namespace splat4d {

size_t Mask::count() const {
    size_t n = 0;
    for (auto v : data) n += (v != 0);
    return n;
}

std::uint8_t quantize8(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

Image quantized(const Image& im) {
    Image out(im.height(), im.width());
    for (size_t i = 0; i < im.size(); ++i)
        out.data()[i] = quantize8(im.data()[i]) / 255.0;
    return out;
}

namespace {

void read_header(std::ifstream& in, const std::string& magic, int& w, int& h,
                 const std::filesystem::path& path) {
    std::string m;
    int maxval = 0;
    in >> m >> w >> h >> maxval;
    if (!in || m != magic || w <= 0 || h <= 0 || maxval != 255)
        throw FormatError("bad " + magic + " header in " + path.string());
    in.get(); // single whitespace before the raster
}

} // namespace

void write_ppm(const Image& im, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    out << "P6\n" << im.width() << " " << im.height() << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<size_t>(im.width()) * 3);
    for (int y = 0; y < im.height(); ++y) {
        for (int x = 0; x < im.width(); ++x)
            for (int c = 0; c < 3; ++c)
                row[static_cast<size_t>(x) * 3 + c] = quantize8(im.at(y, x, c));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw FormatError("short write: " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path.string());
    int w = 0, h = 0;
    read_header(in, "P6", w, h, path);
    Image im(h, w);
    std::vector<std::uint8_t> row(static_cast<size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size()));
        if (!in) throw FormatError("truncated raster in " + path.string());
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                im.at(y, x, c) = row[static_cast<size_t>(x) * 3 + c] / 255.0;
    }
    return im;
}

void write_pgm(const Mask& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    out << "P5\n" << m.width << " " << m.height << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<size_t>(m.width));
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) row[x] = m.at(y, x) ? 255 : 0;
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw FormatError("short write: " + path.string());
}

Mask read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path.string());
    int w = 0, h = 0;
    read_header(in, "P5", w, h, path);
    Mask m(h, w);
    std::vector<std::uint8_t> row(static_cast<size_t>(w));
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size()));
        if (!in) throw FormatError("truncated raster in " + path.string());
        for (int x = 0; x < w; ++x) m.at(y, x) = row[x] >= 128 ? 1 : 0;
    }
    return m;
}

} // namespace splat4d
