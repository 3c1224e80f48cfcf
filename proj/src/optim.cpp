#include "ctnorm/optim.hpp"

#include <cmath>

#include "ctnorm/error.hpp"
#include "ctnorm/rng.hpp"

namespace ctnorm::nn {

void AdamConfig::validate() const
{
    if (!(lr > 0.0))
        throw ConfigError("adam: lr must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw ConfigError("adam: betas must lie in [0, 1)");
    if (!(eps > 0.0))
        throw ConfigError("adam: eps must be positive");
}

Parameter::Parameter(std::string name_, Tensor init, int rank_, bool spectral_, uint64_t u_seed)
    : name(std::move(name_)), value(std::move(init)), spectral(spectral_), rank(rank_)
{
    grad.resize_like(value);
    m.resize_like(value);
    v.resize_like(value);
    if (spectral) {
        StreamRng rng(u_seed, 0x75ull); // "u"
        u.resize(rows());
        double norm2 = 0.0;
        for (auto& ui : u) {
            ui = float(rng.normal());
            norm2 += double(ui) * ui;
        }
        const float inv = float(1.0 / std::sqrt(std::max(norm2, 1e-24)));
        for (auto& ui : u)
            ui *= inv;
    }
}

void adam_step(const std::vector<Parameter*>& params, const AdamConfig& cfg, int64_t t)
{
    cfg.validate();
    if (t < 1)
        throw ConfigError("adam: step index must be >= 1");
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(t));
    for (Parameter* p : params) {
        for (float g : p->grad.data)
            if (!std::isfinite(g))
                throw TrainError("non-finite gradient in parameter " + p->name);
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < int64_t(p->value.data.size()); ++i) {
            const size_t k = size_t(i);
            const double g = p->grad.data[k];
            const double mi = cfg.beta1 * p->m.data[k] + (1.0 - cfg.beta1) * g;
            const double vi = cfg.beta2 * p->v.data[k] + (1.0 - cfg.beta2) * g * g;
            p->m.data[k] = float(mi);
            p->v.data[k] = float(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            p->value.data[k] = float(double(p->value.data[k]) -
                                     cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
        p->grad.zero();
    }
}

Tensor spectral_normalize(Parameter& p, int n_power_iters, double* sigma_out)
{
    if (!p.spectral || p.u.empty())
        throw ConfigError("spectral_normalize on a non-spectral parameter: " + p.name);
    const size_t rows = p.rows();
    const size_t cols = p.cols();
    const float* W = p.value.data.data();

    std::vector<float> v(cols);
    auto normalize = [](std::vector<float>& x) {
        double n2 = 0.0;
        for (float xi : x)
            n2 += double(xi) * xi;
        const double inv = 1.0 / std::max(std::sqrt(n2), 1e-24);
        for (auto& xi : x)
            xi = float(xi * inv);
    };

    auto compute_v = [&]() {
        // v = normalize(W' u)
        for (size_t j = 0; j < cols; ++j)
            v[j] = 0.0f;
        for (size_t i = 0; i < rows; ++i) {
            const float ui = p.u[i];
            const float* row = W + i * cols;
            for (size_t j = 0; j < cols; ++j)
                v[j] += ui * row[j];
        }
        normalize(v);
    };

    for (int it = 0; it < n_power_iters; ++it) {
        compute_v();
        // u = normalize(W v)
        for (size_t i = 0; i < rows; ++i) {
            const float* row = W + i * cols;
            double acc = 0.0;
            for (size_t j = 0; j < cols; ++j)
                acc += double(row[j]) * v[j];
            p.u[i] = float(acc);
        }
        double n2 = 0.0;
        for (float ui : p.u)
            n2 += double(ui) * ui;
        const double inv = 1.0 / std::max(std::sqrt(n2), 1e-24);
        for (auto& ui : p.u)
            ui = float(ui * inv);
    }

    compute_v();
    double sigma = 0.0;
    for (size_t i = 0; i < rows; ++i) {
        const float* row = W + i * cols;
        double acc = 0.0;
        for (size_t j = 0; j < cols; ++j)
            acc += double(row[j]) * v[j];
        sigma += double(p.u[i]) * acc;
    }
    sigma = std::max(sigma, 1e-12);
    if (sigma_out)
        *sigma_out = sigma;

    Tensor eff = p.value;
    const float inv = float(1.0 / sigma);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < int64_t(eff.data.size()); ++i)
        eff.data[size_t(i)] *= inv;
    return eff;
}

Tensor he_conv_init(int cout, int cin, int kd, int kh, int kw, uint64_t seed)
{
    Tensor t(cout, cin, kd, kh, kw);
    const double fan_in = double(cin) * kd * kh * kw;
    const double std_dev = std::sqrt(2.0 / fan_in);
    StreamRng rng(seed, 0x696e6974ull); // "init"
    for (auto& w : t.data)
        w = float(rng.normal() * std_dev);
    return t;
}

Tensor he_linear_init(int cout, int cin, uint64_t seed)
{
    Tensor t(cout, cin, 1, 1, 1);
    const double std_dev = std::sqrt(2.0 / double(cin));
    StreamRng rng(seed, 0x696e6974ull);
    for (auto& w : t.data)
        w = float(rng.normal() * std_dev);
    return t;
}

} // namespace ctnorm::nn
