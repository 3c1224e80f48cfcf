#include "ctnorm/compare.hpp"

#include <algorithm>
#include <cmath>

#include "ctnorm/error.hpp"

namespace ctnorm::radiomics {

BoxStats box_stats(std::vector<double> values)
{
    BoxStats bs;
    bs.n = int64_t(values.size());
    if (values.empty())
        return bs;
    std::sort(values.begin(), values.end());
    auto quantile = [&](double q) {
        const double pos = q * double(values.size() - 1);
        const size_t lo = size_t(pos);
        const size_t hi = std::min(lo + 1, values.size() - 1);
        const double f = pos - double(lo);
        return values[lo] * (1.0 - f) + values[hi] * f;
    };
    bs.min = values.front();
    bs.q1 = quantile(0.25);
    bs.median = quantile(0.5);
    bs.q3 = quantile(0.75);
    bs.max = values.back();
    return bs;
}

std::vector<FeatureComparison> compare_methods(
    const std::map<std::string, std::vector<Volume>>& candidate_rois,
    const std::vector<Volume>& reference_rois)
{
    if (reference_rois.empty())
        throw ShapeError("compare_methods: no reference ROIs");
    for (const auto& [method, vols] : candidate_rois) {
        if (vols.size() != reference_rois.size())
            throw ShapeError("compare_methods: ROI count mismatch for method " + method);
        for (size_t r = 0; r < vols.size(); ++r)
            if (vols[r].nz != reference_rois[r].nz || vols[r].ny != reference_rois[r].ny ||
                vols[r].nx != reference_rois[r].nx)
                throw ShapeError("compare_methods: ROI dims mismatch for method " + method);
    }

    // per-slice features: reference first, then every candidate
    const size_t n_rois = reference_rois.size();
    auto roi_features = [](const Volume& v) {
        std::vector<FeatureVector> fs(size_t(v.nz));
#pragma omp parallel for schedule(dynamic)
        for (int z = 0; z < v.nz; ++z)
            fs[size_t(z)] = feature_vector(plane_slice(v, Plane::Axial, z));
        return fs;
    };

    std::vector<std::vector<FeatureVector>> ref_feats(n_rois);
    for (size_t r = 0; r < n_rois; ++r)
        ref_feats[r] = roi_features(reference_rois[r]);

    std::vector<FeatureComparison> out(kFeatureCount);
    for (int f = 0; f < kFeatureCount; ++f)
        out[size_t(f)].feature = kFeatureNames[size_t(f)];

    for (const auto& [method, vols] : candidate_rois) {
        for (size_t r = 0; r < n_rois; ++r) {
            const auto cand = roi_features(vols[r]);
            for (int z = 0; z < vols[r].nz; ++z) {
                const auto cv = cand[size_t(z)].values();
                const auto rv = ref_feats[r][size_t(z)].values();
                for (int f = 0; f < kFeatureCount; ++f) {
                    ErrorSample s;
                    s.roi_index = int(r);
                    s.slice = z;
                    s.candidate = cv[size_t(f)];
                    s.reference = rv[size_t(f)];
                    s.error = normalized_error(s.candidate, s.reference);
                    out[size_t(f)].errors[method].push_back(s);
                }
            }
        }
    }

    for (auto& fc : out) {
        for (const auto& [method, samples] : fc.errors) {
            std::vector<double> errs;
            errs.reserve(samples.size());
            for (const auto& s : samples)
                errs.push_back(s.error);
            fc.box[method] = box_stats(std::move(errs));
        }
        static const std::pair<const char*, const char*> pairs[3] = {
            {"gan", "raw"}, {"gan", "cnn"}, {"cnn", "raw"}};
        for (const auto& [ma, mb] : pairs) {
            const auto ia = fc.errors.find(ma);
            const auto ib = fc.errors.find(mb);
            if (ia == fc.errors.end() || ib == fc.errors.end())
                continue;
            std::vector<double> ea, eb;
            for (const auto& s : ia->second)
                ea.push_back(s.error);
            for (const auto& s : ib->second)
                eb.push_back(s.error);
            PairedTest t;
            t.method_a = ma;
            t.method_b = mb;
            t.result = wilcoxon_signed_rank(ea, eb, Alternative::TwoSided);
            t.significant = t.result.p_value < 0.05;
            fc.tests.push_back(std::move(t));
        }
    }
    return out;
}

} // namespace ctnorm::radiomics
