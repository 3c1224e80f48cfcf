#pragma once

#include <map>
#include <string>
#include <vector>

#include "ctnorm/radiomics.hpp"
#include "ctnorm/volume.hpp"
#include "ctnorm/wilcoxon.hpp"

namespace ctnorm::radiomics {

struct ErrorSample {
    int roi_index = 0;
    int slice = 0;
    double candidate = 0.0;
    double reference = 0.0;
    double error = 0.0;
};

struct BoxStats {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
    int64_t n = 0;
};

BoxStats box_stats(std::vector<double> values);

struct PairedTest {
    std::string method_a, method_b; // errors of a vs errors of b
    WilcoxonResult result;
    bool significant = false; // p < 0.05
};

struct FeatureComparison {
    std::string feature;
    std::map<std::string, std::vector<ErrorSample>> errors; // method -> samples
    std::map<std::string, BoxStats> box;
    std::vector<PairedTest> tests;
};

// Per-slice feature errors of each candidate ROI set against the reference
// ROIs, paired Wilcoxon tests between methods (gan-vs-raw, gan-vs-cnn,
// cnn-vs-raw when present), and box-plot summaries. All volumes must share
// dims with their reference counterpart; thick-slice candidates are
// expected to be z-matched beforehand (resample_z_nearest).
std::vector<FeatureComparison> compare_methods(
    const std::map<std::string, std::vector<Volume>>& candidate_rois,
    const std::vector<Volume>& reference_rois);

} // namespace ctnorm::radiomics
