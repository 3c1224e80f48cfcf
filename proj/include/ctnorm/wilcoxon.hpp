#pragma once

#include <span>
#include <string>

namespace ctnorm::radiomics {

enum class Alternative { TwoSided, Less, Greater };

const char* alternative_name(Alternative a);

struct WilcoxonResult {
    int n_effective = 0;   // pairs left after zero-difference removal
    double w_plus = 0.0;   // rank sum of positive differences
    double w_minus = 0.0;
    double w_statistic = 0.0; // min(w_plus, w_minus)
    double p_value = 1.0;
    enum class Method { Exact, NormalApprox } method = Method::Exact;
    Alternative alternative = Alternative::TwoSided;
    bool degenerate = false; // all differences were zero
};

// Paired signed-rank test on differences a[i] - b[i]. Zeros are dropped,
// ties get mid-ranks. Exact p by dynamic programming over the rank-sum
// distribution for tie-free n <= 25; normal approximation with tie
// correction and 0.5 continuity correction otherwise.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    Alternative alternative = Alternative::TwoSided);

} // namespace ctnorm::radiomics
