#pragma once

#include <optional>

#include "splat4d/image.hpp"

namespace splat4d {

inline constexpr double kPsnrCap = 99.0; // dB reported for identical images

/// 10 log10(1 / MSE) over all pixels and channels, for images in [0,1].
double psnr(const Image& a, const Image& b);

/// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// dynamic range 1, valid windows only, per channel then averaged.
double ssim(const Image& a, const Image& b);

/// ssim value plus its exact gradient w.r.t. the first image.
double ssim_with_grad(const Image& a, const Image& b, Image& d_a);

/// Mean absolute difference and its subgradient w.r.t. the first image.
double l1_with_grad(const Image& a, const Image& b, Image& d_a);
double l1(const Image& a, const Image& b);

/// PSNR restricted to mask pixels.
double masked_psnr(const Image& a, const Image& b, const Mask& mask);

/// SSIM on the mask's bounding box (grown to window size when needed),
/// averaged over windows whose centers lie in the mask.
double masked_ssim(const Image& a, const Image& b, const Mask& mask);

struct MetricReport {
    double psnr = 0.0;
    double ssim = 0.0;
    std::optional<double> psnr_masked;
    std::optional<double> ssim_masked;
};

MetricReport compute_metrics(const Image& a, const Image& b,
                             const Mask* mask = nullptr);

} // namespace splat4d
