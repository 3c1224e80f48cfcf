#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "ctnorm/volume.hpp"

namespace ctnorm::metrics {

// Weights of the random-feature perceptual metric are drawn from this seed.
constexpr uint64_t kSrfSeed = 0x4C504950ull;

// 10*log10(1/MSE) for images in [0, 1]; +infinity for identical images.
double psnr(const Image2D& a, const Image2D& b);

// Mean local SSIM, 11x11 Gaussian window sigma 1.5, K1 = 0.01, K2 = 0.03 at
// data range 1. Symmetric in (a, b). Throws ShapeError when the image is
// smaller than the window.
double ssim(const Image2D& a, const Image2D& b);

// Seeded-random-feature perceptual distance: a fixed 3-stage conv stack
// (8/16/32 channels, 3x3, stride 2, LeakyReLU 0.2) with He-scaled weights
// drawn from `seed`; features are channel-unit-normalized per position and
// compared by mean squared difference, averaged over stages. Requires
// images of at least 32x32.
double perceptual_distance(const Image2D& a, const Image2D& b, uint64_t seed = kSrfSeed);

struct PlaneStats {
    double psnr_sum = 0.0;
    int64_t psnr_n = 0;
    int64_t psnr_inf = 0; // identical slices excluded from the mean
    double ssim_sum = 0.0;
    int64_t ssim_n = 0;
    double perc_sum = 0.0;
    int64_t perc_n = 0;
    int64_t skipped = 0; // slices too small for a metric

    double psnr_mean() const;
    double ssim_mean() const { return ssim_n ? ssim_sum / double(ssim_n) : 0.0; }
    double perc_mean() const { return perc_n ? perc_sum / double(perc_n) : 0.0; }
};

// 3 metrics x 3 planes, accumulated over all slices of all volumes fed in.
struct MetricReport {
    std::array<PlaneStats, 3> planes; // indexed by Plane

    const PlaneStats& plane(Plane p) const { return planes[size_t(p)]; }
    void merge(const MetricReport& o);

    std::string to_csv() const;
    std::string to_json() const;
    std::string pretty() const;
};

// Slice-wise tri-planar evaluation of candidate against reference (equal
// dims, HU in; both are rescaled to [0, 1] internally).
MetricReport evaluate_volume_pair(const Volume& candidate, const Volume& reference);

} // namespace ctnorm::metrics
