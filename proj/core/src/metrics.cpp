#include "splat4d/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "splat4d/errors.hpp"

namespace splat4d {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01; // (K1 L)^2 with L = 1
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWin>& window_taps() {
    static const std::array<double, kWin> taps = [] {
        std::array<double, kWin> t{};
        double sum = 0.0;
        for (int i = 0; i < kWin; ++i) {
            const double d = i - (kWin - 1) / 2.0;
            t[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            sum += t[i];
        }
        for (double& v : t) v /= sum;
        return t;
    }();
    return taps;
}

void require_same_shape(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ShapeError("metrics: image shapes differ");
}

// Plane helpers: channel c of an image as a dense row-major array.
std::vector<double> plane(const Image& im, int c) {
    std::vector<double> p(static_cast<size_t>(im.height()) * im.width());
    for (int y = 0; y < im.height(); ++y)
        for (int x = 0; x < im.width(); ++x)
            p[static_cast<size_t>(y) * im.width() + x] = im.at(y, x, c);
    return p;
}

// Separable valid-mode Gaussian filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& p, int h, int w) {
    const auto& taps = window_taps();
    const int wo = w - kWin + 1;
    const int ho = h - kWin + 1;
    std::vector<double> tmp(static_cast<size_t>(h) * wo);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < wo; ++x) {
            double s = 0.0;
            for (int t = 0; t < kWin; ++t)
                s += taps[t] * p[static_cast<size_t>(y) * w + x + t];
            tmp[static_cast<size_t>(y) * wo + x] = s;
        }
    std::vector<double> out(static_cast<size_t>(ho) * wo);
    for (int y = 0; y < ho; ++y)
        for (int x = 0; x < wo; ++x) {
            double s = 0.0;
            for (int t = 0; t < kWin; ++t)
                s += taps[t] * tmp[static_cast<size_t>(y + t) * wo + x];
            out[static_cast<size_t>(y) * wo + x] = s;
        }
    return out;
}

struct SsimMaps {
    int ho = 0, wo = 0;
    std::vector<double> mu_x, mu_y, e_xx, e_yy, e_xy;

    double window(int y, int x, double* a1 = nullptr, double* a2 = nullptr,
                  double* b1 = nullptr, double* b2 = nullptr) const {
        const size_t i = static_cast<size_t>(y) * wo + x;
        const double mx = mu_x[i], my = mu_y[i];
        const double sxx = e_xx[i] - mx * mx;
        const double syy = e_yy[i] - my * my;
        const double sxy = e_xy[i] - mx * my;
        const double va1 = 2.0 * mx * my + kC1;
        const double va2 = 2.0 * sxy + kC2;
        const double vb1 = mx * mx + my * my + kC1;
        const double vb2 = sxx + syy + kC2;
        if (a1) *a1 = va1;
        if (a2) *a2 = va2;
        if (b1) *b1 = vb1;
        if (b2) *b2 = vb2;
        return (va1 * va2) / (vb1 * vb2);
    }
};

SsimMaps ssim_maps(const std::vector<double>& x, const std::vector<double>& y,
                   int h, int w) {
    SsimMaps m;
    m.ho = h - kWin + 1;
    m.wo = w - kWin + 1;
    const size_t n = x.size();
    std::vector<double> xx(n), yy(n), xy(n);
    for (size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    m.mu_x = filter_valid(x, h, w);
    m.mu_y = filter_valid(y, h, w);
    m.e_xx = filter_valid(xx, h, w);
    m.e_yy = filter_valid(yy, h, w);
    m.e_xy = filter_valid(xy, h, w);
    return m;
}

void require_window_fits(int h, int w) {
    if (h < kWin || w < kWin)
        throw ShapeError("ssim: image smaller than the " + std::to_string(kWin) +
                         "x" + std::to_string(kWin) + " window");
}

double mse_all(const Image& a, const Image& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

} // namespace

double psnr(const Image& a, const Image& b) {
    require_same_shape(a, b);
    if (a.size() == 0) throw ShapeError("psnr: empty image");
    const double mse = mse_all(a, b);
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b);
    require_window_fits(a.height(), b.width());
    double total = 0.0;
    long count = 0;
    for (int c = 0; c < 3; ++c) {
        const auto pa = plane(a, c);
        const auto pb = plane(b, c);
        const SsimMaps m = ssim_maps(pa, pb, a.height(), a.width());
        for (int y = 0; y < m.ho; ++y)
            for (int x = 0; x < m.wo; ++x) {
                total += m.window(y, x);
                ++count;
            }
    }
    return total / static_cast<double>(count);
}

double ssim_with_grad(const Image& a, const Image& b, Image& d_a) {
    require_same_shape(a, b);
    require_window_fits(a.height(), a.width());
    d_a = Image(a.height(), a.width());
    const auto& taps = window_taps();
    const int h = a.height(), w = a.width();

    double total = 0.0;
    long count = 0;
    for (int c = 0; c < 3; ++c) {
        const auto pa = plane(a, c);
        const auto pb = plane(b, c);
        const SsimMaps m = ssim_maps(pa, pb, h, w);
        count += static_cast<long>(m.ho) * m.wo;
        for (int y = 0; y < m.ho; ++y) {
            for (int x = 0; x < m.wo; ++x) {
                double a1, a2, b1, b2;
                total += m.window(y, x, &a1, &a2, &b1, &b2);
                const size_t i = static_cast<size_t>(y) * m.wo + x;
                const double mx = m.mu_x[i], my = m.mu_y[i];
                // dS/d mu_x, dS/d sigma_x^2, dS/d sigma_xy
                const double c1 = 2.0 * my * a2 / (b1 * b2) -
                                  2.0 * mx * a1 * a2 / (b1 * b1 * b2);
                const double c2 = -a1 * a2 / (b1 * b2 * b2);
                const double c3 = 2.0 * a1 / (b1 * b2);
                const double alpha = c1 - 2.0 * mx * c2 - my * c3;
                const double beta = 2.0 * c2;
                const double gamma = c3;
                for (int u = 0; u < kWin; ++u) {
                    for (int v = 0; v < kWin; ++v) {
                        const double wt = taps[u] * taps[v];
                        const int py = y + u, px = x + v;
                        const double xv = pa[static_cast<size_t>(py) * w + px];
                        const double yv = pb[static_cast<size_t>(py) * w + px];
                        d_a.at(py, px, c) += wt * (alpha + beta * xv + gamma * yv);
                    }
                }
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(count);
    for (size_t i = 0; i < d_a.size(); ++i) d_a.data()[i] *= inv;
    return total * inv;
}

double l1(const Image& a, const Image& b) {
    require_same_shape(a, b);
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += std::abs(a.data()[i] - b.data()[i]);
    return acc / static_cast<double>(a.size());
}

double l1_with_grad(const Image& a, const Image& b, Image& d_a) {
    require_same_shape(a, b);
    d_a = Image(a.height(), a.width());
    double acc = 0.0;
    const double inv = 1.0 / static_cast<double>(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        acc += std::abs(d);
        d_a.data()[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv;
    }
    return acc * inv;
}

double masked_psnr(const Image& a, const Image& b, const Mask& mask) {
    require_same_shape(a, b);
    if (mask.height != a.height() || mask.width != a.width())
        throw ShapeError("masked_psnr: mask shape mismatch");
    double acc = 0.0;
    long n = 0;
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) {
            if (!mask.at(y, x)) continue;
            for (int c = 0; c < 3; ++c) {
                const double d = a.at(y, x, c) - b.at(y, x, c);
                acc += d * d;
            }
            n += 3;
        }
    if (n == 0) throw DomainError("masked_psnr: empty mask region");
    const double mse = acc / static_cast<double>(n);
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double masked_ssim(const Image& a, const Image& b, const Mask& mask) {
    require_same_shape(a, b);
    if (mask.height != a.height() || mask.width != a.width())
        throw ShapeError("masked_ssim: mask shape mismatch");
    require_window_fits(a.height(), a.width());

    int x0 = a.width(), x1 = -1, y0 = a.height(), y1 = -1;
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x)
            if (mask.at(y, x)) {
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
    if (x1 < 0) throw DomainError("masked_ssim: empty mask region");

    // Grow the bounding box to at least the window size, inside the image.
    auto grow = [](int& lo, int& hi, int need, int limit) {
        while (hi - lo + 1 < need) {
            if (lo > 0) --lo;
            if (hi - lo + 1 >= need) break;
            if (hi < limit - 1) ++hi;
        }
    };
    grow(x0, x1, kWin, a.width());
    grow(y0, y1, kWin, a.height());
    const int ch = y1 - y0 + 1, cw = x1 - x0 + 1;

    double total = 0.0;
    long count = 0;
    const int half = kWin / 2;
    for (int c = 0; c < 3; ++c) {
        std::vector<double> pa(static_cast<size_t>(ch) * cw);
        std::vector<double> pb(static_cast<size_t>(ch) * cw);
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x) {
                pa[static_cast<size_t>(y) * cw + x] = a.at(y0 + y, x0 + x, c);
                pb[static_cast<size_t>(y) * cw + x] = b.at(y0 + y, x0 + x, c);
            }
        const SsimMaps m = ssim_maps(pa, pb, ch, cw);
        for (int y = 0; y < m.ho; ++y)
            for (int x = 0; x < m.wo; ++x) {
                if (!mask.at(y0 + y + half, x0 + x + half)) continue;
                total += m.window(y, x);
                ++count;
            }
    }
    if (count == 0)
        throw DomainError("masked_ssim: no window centers inside the mask");
    return total / static_cast<double>(count);
}

MetricReport compute_metrics(const Image& a, const Image& b, const Mask* mask) {
    MetricReport r;
    r.psnr = psnr(a, b);
    r.ssim = ssim(a, b);
    if (mask) {
        r.psnr_masked = masked_psnr(a, b, *mask);
        r.ssim_masked = masked_ssim(a, b, *mask);
    }
    return r;
}

} // namespace splat4d
