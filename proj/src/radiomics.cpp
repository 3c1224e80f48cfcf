#include "ctnorm/radiomics.hpp"

#include <algorithm>
#include <cmath>

#include "ctnorm/error.hpp"

namespace ctnorm::radiomics {

const std::array<const char*, kFeatureCount> kFeatureNames = {
    "Mean",     "Variance",    "Skewness",    "Kurtosis",
    "Entropy",  "Contrast",    "Correlation", "JointEnergy",
    "InverseDifferenceMoment"};

QuantizedRoi quantize_roi(const Image2D& slice_hu)
{
    if (slice_hu.pix.empty())
        throw ShapeError("quantize_roi: empty slice");
    double mn = slice_hu.pix[0];
    for (float v : slice_hu.pix)
        mn = std::min(mn, double(v));
    QuantizedRoi q;
    q.labels.resize(slice_hu.pix.size());
    int max_label = 0;
    for (size_t i = 0; i < slice_hu.pix.size(); ++i) {
        const int l = int(std::floor((double(slice_hu.pix[i]) - mn) / kBinWidthHu));
        q.labels[i] = l;
        max_label = std::max(max_label, l);
    }
    q.n_bins = max_label + 1;
    return q;
}

std::vector<double> compute_glcm(const QuantizedRoi& q, int h, int w)
{
    if (h * w < 2 || int(q.labels.size()) != h * w)
        throw ShapeError("compute_glcm: need at least 2 pixels");
    const int n = q.n_bins;
    std::vector<double> m(size_t(n) * n, 0.0);
    static constexpr int offsets[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
    double total = 0.0;
    for (const auto& off : offsets) {
        for (int y = 0; y < h; ++y) {
            const int yy = y + off[0];
            if (yy < 0 || yy >= h)
                continue;
            for (int x = 0; x < w; ++x) {
                const int xx = x + off[1];
                if (xx < 0 || xx >= w)
                    continue;
                const int a = q.labels[size_t(y) * w + x];
                const int b = q.labels[size_t(yy) * w + xx];
                m[size_t(a) * n + b] += 1.0;
                m[size_t(b) * n + a] += 1.0;
                total += 2.0;
            }
        }
    }
    if (total > 0.0)
        for (auto& v : m)
            v /= total;
    return m;
}

FeatureVector feature_vector(const Image2D& slice_hu)
{
    if (slice_hu.h < 2 || slice_hu.w < 2)
        throw ShapeError("feature_vector: slice must be at least 2x2");

    FeatureVector f;
    const size_t n = slice_hu.pix.size();

    double sum = 0.0;
    for (float v : slice_hu.pix)
        sum += v;
    f.mean = sum / double(n);

    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (float v : slice_hu.pix) {
        const double d = double(v) - f.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= double(n);
    m3 /= double(n);
    m4 /= double(n);
    f.variance = m2;
    if (m2 > 1e-24) {
        f.skewness = m3 / std::pow(m2, 1.5);
        f.kurtosis = m4 / (m2 * m2);
    } else {
        f.skewness = 0.0;
        f.kurtosis = 0.0;
    }

    const QuantizedRoi q = quantize_roi(slice_hu);
    {
        std::vector<double> hist(size_t(q.n_bins), 0.0);
        for (int l : q.labels)
            hist[size_t(l)] += 1.0;
        double ent = 0.0;
        for (double c : hist)
            if (c > 0.0) {
                const double p = c / double(n);
                ent -= p * std::log2(p);
            }
        f.entropy = ent;
    }

    const std::vector<double> glcm = compute_glcm(q, slice_hu.h, slice_hu.w);
    const int nb = q.n_bins;
    double mu_i = 0.0;
    for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j)
            mu_i += i * glcm[size_t(i) * nb + j];
    double var_i = 0.0;
    for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j)
            var_i += (i - mu_i) * (i - mu_i) * glcm[size_t(i) * nb + j];

    double contrast = 0.0, corr = 0.0, energy = 0.0, idm = 0.0;
    for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j) {
            const double p = glcm[size_t(i) * nb + j];
            const double d = double(i - j);
            contrast += p * d * d;
            corr += p * (i - mu_i) * (j - mu_i);
            energy += p * p;
            idm += p / (1.0 + d * d);
        }
    f.contrast = contrast;
    // symmetric GLCM: both marginals share mu and sigma
    f.correlation = var_i > 1e-24 ? corr / var_i : 1.0;
    f.joint_energy = energy;
    f.idm = idm;
    return f;
}

double normalized_error(double xhat, double x)
{
    return std::abs(xhat - x) / std::max(std::abs(x), 1e-8);
}

} // namespace ctnorm::radiomics
