#pragma once

// Central finite-difference gradient checking against the analytic backward
// passes. Loss: weighted sum of outputs with fixed random weights, so every
// output element contributes.

#include <cmath>
#include <functional>
#include <vector>

#include "ctnorm/rng.hpp"
#include "ctnorm/tensor.hpp"

namespace testsupport {

struct FdReport {
    double max_rel_err = 0.0;
    int checked = 0;
};

// forward: x -> scalar loss. analytic_grad: precomputed dloss/dx. Probes
// n_probes randomly chosen elements of x.
inline FdReport fd_check(ctnorm::Tensor& x, const std::function<double()>& loss,
                         const std::vector<float>& analytic_grad, int n_probes, uint64_t seed,
                         double h = 5e-3)
{
    ctnorm::StreamRng rng(seed);
    FdReport rep;
    for (int p = 0; p < n_probes; ++p) {
        const size_t i = rng.below(x.data.size());
        const float orig = x.data[i];
        x.data[i] = float(orig + h);
        const double lp = loss();
        x.data[i] = float(orig - h);
        const double lm = loss();
        x.data[i] = orig;
        const double fd = (lp - lm) / (2.0 * h);
        const double an = analytic_grad[i];
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
        rep.max_rel_err = std::max(rep.max_rel_err, std::abs(fd - an) / denom);
        ++rep.checked;
    }
    return rep;
}

inline void fill_normal(ctnorm::Tensor& t, uint64_t seed, double scale = 1.0)
{
    ctnorm::StreamRng rng(seed);
    for (auto& v : t.data)
        v = float(rng.normal() * scale);
}

} // namespace testsupport
