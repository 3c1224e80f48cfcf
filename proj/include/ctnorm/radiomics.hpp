#pragma once

#include <array>
#include <string>
#include <vector>

#include "ctnorm/volume.hpp"

namespace ctnorm::radiomics {

constexpr double kBinWidthHu = 25.0;

// Fixed-bin-width quantization anchored at the slice minimum.
struct QuantizedRoi {
    std::vector<int> labels; // row-major, values in [0, n_bins)
    int n_bins = 0;
};
QuantizedRoi quantize_roi(const Image2D& slice_hu);

// Symmetric GLCM over offsets (0,1), (1,0), (1,1), (1,-1) at distance 1,
// normalized to sum 1. Row-major n_bins x n_bins.
std::vector<double> compute_glcm(const QuantizedRoi& q, int h, int w);

constexpr int kFeatureCount = 9;
extern const std::array<const char*, kFeatureCount> kFeatureNames;

// First-order {Mean, Variance, Skewness, Kurtosis, Entropy} over raw HU plus
// GLCM {Contrast, Correlation, JointEnergy, InverseDifferenceMoment}.
struct FeatureVector {
    double mean = 0.0;
    double variance = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;
    double entropy = 0.0;
    double contrast = 0.0;
    double correlation = 1.0;
    double joint_energy = 1.0;
    double idm = 1.0;

    std::array<double, kFeatureCount> values() const
    {
        return {mean, variance, skewness, kurtosis, entropy,
                contrast, correlation, joint_energy, idm};
    }
};

FeatureVector feature_vector(const Image2D& slice_hu);

// |xhat - x| / max(|x|, 1e-8)
double normalized_error(double xhat, double x);

} // namespace ctnorm::radiomics
