#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctnorm/tensor.hpp"

namespace ctnorm::nn {

struct AdamConfig {
    double lr = 1e-5;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const; // throws ConfigError
};

// Weight (or bias) with gradient buffer, Adam moments, and optional
// spectral-norm state. Spectrally normalized weights view their tensor as
// the matrix (Cout x rest); u has length Cout and unit norm.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor m;
    Tensor v;
    std::vector<float> u; // empty unless spectral
    bool spectral = false;
    int rank = 5; // serialized rank (2 for matrices, 1 for biases, ...)

    Parameter() = default;
    Parameter(std::string name_, Tensor init, int rank_, bool spectral_, uint64_t u_seed);

    size_t rows() const { return size_t(value.shape[0]); }
    size_t cols() const { return value.count() / rows(); }
};

// Bias-corrected Adam update, applied in place; gradients are zeroed
// afterwards. Throws TrainError naming the parameter on non-finite
// gradients. t is the 1-based step index.
void adam_step(const std::vector<Parameter*>& params, const AdamConfig& cfg, int64_t t);

// Runs n_power_iters of power iteration on the (rows x cols) matrix view,
// updating p.u in place, then returns value / sigma with sigma = u' W v.
// n_power_iters = 0 re-estimates sigma from the stored u without advancing
// it. Gradients through the result treat sigma's u, v as constants.
Tensor spectral_normalize(Parameter& p, int n_power_iters, double* sigma_out = nullptr);

// Deterministic He-style initializers.
Tensor he_conv_init(int cout, int cin, int kd, int kh, int kw, uint64_t seed);
Tensor he_linear_init(int cout, int cin, uint64_t seed);

} // namespace ctnorm::nn
