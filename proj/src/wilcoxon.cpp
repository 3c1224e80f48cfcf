#include "ctnorm/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ctnorm/error.hpp"

namespace ctnorm::radiomics {

const char* alternative_name(Alternative a)
{
    switch (a) {
    case Alternative::TwoSided: return "two-sided";
    case Alternative::Less: return "less";
    default: return "greater";
    }
}

namespace {

double phi(double z)
{
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double clamp_p(double p)
{
    return std::min(1.0, std::max(p, 1e-300));
}

} // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    Alternative alternative)
{
    if (a.size() != b.size() || a.empty())
        throw DomainError("wilcoxon: need equal-length, nonempty samples");

    std::vector<double> diffs;
    diffs.reserve(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0)
            diffs.push_back(d);
    }

    WilcoxonResult res;
    res.alternative = alternative;
    res.n_effective = int(diffs.size());
    if (diffs.empty()) {
        res.degenerate = true;
        res.p_value = 1.0;
        return res;
    }

    const int n = int(diffs.size());
    std::vector<int> order(diffs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
        return std::abs(diffs[size_t(i)]) < std::abs(diffs[size_t(j)]);
    });

    // mid-ranks over |d|
    std::vector<double> rank(diffs.size());
    bool ties = false;
    std::vector<int> tie_sizes;
    for (size_t i = 0; i < order.size();) {
        size_t j = i;
        while (j + 1 < order.size() &&
               std::abs(diffs[size_t(order[j + 1])]) == std::abs(diffs[size_t(order[i])]))
            ++j;
        const double r = 0.5 * double(i + 1 + j + 1);
        for (size_t k = i; k <= j; ++k)
            rank[size_t(order[k])] = r;
        if (j > i) {
            ties = true;
            tie_sizes.push_back(int(j - i + 1));
        }
        i = j + 1;
    }

    double w_plus = 0.0;
    for (size_t i = 0; i < diffs.size(); ++i)
        if (diffs[i] > 0.0)
            w_plus += rank[i];
    const double total = double(n) * (n + 1) / 2.0;
    res.w_plus = w_plus;
    res.w_minus = total - w_plus;
    res.w_statistic = std::min(res.w_plus, res.w_minus);

    if (!ties && n <= 25) {
        res.method = WilcoxonResult::Method::Exact;
        // distribution of W+ over all 2^n sign assignments; ranks are the
        // integers 1..n here, so counts are exact in doubles
        const int wmax = int(total);
        std::vector<double> count(size_t(wmax) + 1, 0.0);
        count[0] = 1.0;
        for (int r = 1; r <= n; ++r)
            for (int w = wmax; w >= r; --w)
                count[size_t(w)] += count[size_t(w - r)];
        const double denom = std::pow(2.0, n);
        const int w_obs = int(std::lround(w_plus));
        double p_le = 0.0;
        for (int w = 0; w <= w_obs; ++w)
            p_le += count[size_t(w)];
        p_le /= denom;
        double p_ge = 0.0;
        for (int w = w_obs; w <= wmax; ++w)
            p_ge += count[size_t(w)];
        p_ge /= denom;
        switch (alternative) {
        case Alternative::Greater: res.p_value = clamp_p(p_ge); break;
        case Alternative::Less: res.p_value = clamp_p(p_le); break;
        case Alternative::TwoSided:
            res.p_value = clamp_p(2.0 * std::min(p_le, p_ge));
            break;
        }
    } else {
        res.method = WilcoxonResult::Method::NormalApprox;
        const double mu = total / 2.0;
        double var = double(n) * (n + 1) * (2 * n + 1) / 24.0;
        for (int t : tie_sizes)
            var -= (double(t) * t * t - t) / 48.0;
        const double sd = std::sqrt(std::max(var, 1e-24));
        switch (alternative) {
        case Alternative::Greater:
            res.p_value = clamp_p(phi(-(w_plus - mu - 0.5) / sd));
            break;
        case Alternative::Less:
            res.p_value = clamp_p(phi((w_plus - mu + 0.5) / sd));
            break;
        case Alternative::TwoSided: {
            const double z = std::max(std::abs(w_plus - mu) - 0.5, 0.0) / sd;
            res.p_value = clamp_p(2.0 * phi(-z));
            break;
        }
        }
    }
    return res;
}

} // namespace ctnorm::radiomics
