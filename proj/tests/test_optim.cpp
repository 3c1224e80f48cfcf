#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ctnorm/error.hpp"
#include "ctnorm/optim.hpp"
#include "ctnorm/rng.hpp"
#include "support/svd_oracle.hpp"

using namespace ctnorm;

namespace {

nn::Parameter make_param(const std::vector<float>& vals, int rows, int cols, bool spectral,
                         uint64_t seed = 1)
{
    Tensor t(rows, cols, 1, 1, 1);
    t.data = vals;
    return nn::Parameter("p", std::move(t), 2, spectral, seed);
}

} // namespace

TEST_CASE("adam first step moves by lr in the gradient sign direction")
{
    nn::AdamConfig cfg;
    cfg.lr = 1e-3;
    Tensor t(1, 4, 1, 1, 1);
    t.data = {1.0f, -2.0f, 0.5f, 3.0f};
    nn::Parameter p("w", std::move(t), 2, false, 0);
    p.grad.data = {0.7f, -0.2f, 1e3f, 0.0f};

    const std::vector<float> before = p.value.data;
    nn::adam_step({&p}, cfg, 1);
    CHECK(p.value.data[0] == doctest::Approx(before[0] - cfg.lr).epsilon(1e-6));
    CHECK(p.value.data[1] == doctest::Approx(before[1] + cfg.lr).epsilon(1e-6));
    CHECK(p.value.data[2] == doctest::Approx(before[2] - cfg.lr).epsilon(1e-6));
    // zero gradient leaves the parameter and moments untouched
    CHECK(p.value.data[3] == before[3]);
    CHECK(p.m.data[3] == 0.0f);
    CHECK(p.v.data[3] == 0.0f);
    // gradients are cleared after the step
    for (float g : p.grad.data)
        CHECK(g == 0.0f);
}

TEST_CASE("two opposing steps stay within 2*lr of the start")
{
    nn::AdamConfig cfg;
    cfg.lr = 1e-3;
    cfg.beta1 = 0.5;
    Tensor t(1, 1, 1, 1, 1);
    t.data = {0.25f};
    nn::Parameter p("w", std::move(t), 1, false, 0);
    const float theta0 = p.value.data[0];
    p.grad.data = {1.0f};
    nn::adam_step({&p}, cfg, 1);
    p.grad.data = {-1.0f};
    nn::adam_step({&p}, cfg, 2);
    CHECK(std::abs(p.value.data[0] - theta0) < 2.0 * cfg.lr);
}

TEST_CASE("adam rejects non-finite gradients naming the parameter")
{
    nn::AdamConfig cfg;
    Tensor t(1, 2, 1, 1, 1);
    nn::Parameter p("g.block3.conv1.w", std::move(t), 2, false, 0);
    p.grad.data[0] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_WITH_AS(nn::adam_step({&p}, cfg, 1), doctest::Contains("g.block3.conv1.w"),
                         TrainError);
}

TEST_CASE("adam config validation")
{
    nn::AdamConfig cfg;
    cfg.lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.lr = 1e-4;
    cfg.beta1 = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("spectral norm of diag(3, 4)")
{
    nn::Parameter p = make_param({3.0f, 0.0f, 0.0f, 4.0f}, 2, 2, true, 5);
    double sigma = 0.0;
    Tensor eff = nn::spectral_normalize(p, 30, &sigma);
    CHECK(sigma == doctest::Approx(4.0).epsilon(1e-4));
    CHECK(eff.data[0] == doctest::Approx(0.75).epsilon(1e-3));
    CHECK(eff.data[3] == doctest::Approx(1.0).epsilon(1e-3));
    // u stays unit length
    double n2 = 0.0;
    for (float u : p.u)
        n2 += double(u) * u;
    CHECK(std::sqrt(n2) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("sigma estimate within 1% of the Jacobi-SVD oracle on random matrices")
{
    StreamRng rng(99);
    for (int rep = 0; rep < 10; ++rep) {
        const int rows = 2 + int(rng.below(8));
        const int cols = 2 + int(rng.below(12));
        std::vector<float> w(size_t(rows) * cols);
        for (auto& v : w)
            v = float(rng.normal());
        nn::Parameter p = make_param(w, rows, cols, true, 1000 + rep);
        double sigma = 0.0;
        nn::spectral_normalize(p, 20, &sigma);
        const double oracle = testsupport::largest_singular_value(w, rows, cols);
        CHECK(std::abs(sigma - oracle) / oracle < 0.01);
    }
}

TEST_CASE("already-normalized matrix is a fixed point")
{
    StreamRng rng(7);
    std::vector<float> w(36);
    for (auto& v : w)
        v = float(rng.normal());
    nn::Parameter p = make_param(w, 6, 6, true, 77);
    double sigma = 0.0;
    Tensor eff = nn::spectral_normalize(p, 30, &sigma);

    nn::Parameter p2 = make_param(eff.data, 6, 6, true, 78);
    double sigma2 = 0.0;
    Tensor eff2 = nn::spectral_normalize(p2, 30, &sigma2);
    CHECK(sigma2 == doctest::Approx(1.0).epsilon(1e-4));
    for (size_t i = 0; i < eff.data.size(); ++i)
        CHECK(eff2.data[i] == doctest::Approx(eff.data[i]).epsilon(1e-4));
}

TEST_CASE("zero matrix hits the sigma guard instead of dividing by zero")
{
    nn::Parameter p = make_param({0.0f, 0.0f, 0.0f, 0.0f}, 2, 2, true, 3);
    double sigma = 0.0;
    Tensor eff = nn::spectral_normalize(p, 5, &sigma);
    CHECK(sigma == doctest::Approx(1e-12));
    for (float v : eff.data)
        CHECK(std::isfinite(v));
}

TEST_CASE("normalized weight certifies sigma in [0.95, 1.05] against the oracle")
{
    StreamRng rng(1234);
    for (int rep = 0; rep < 50; ++rep) {
        const int rows = 2 + int(rng.below(10));
        const int cols = 2 + int(rng.below(20));
        std::vector<float> w(size_t(rows) * cols);
        for (auto& v : w)
            v = float(rng.normal() * (0.1 + rng.uniform() * 3.0));
        nn::Parameter p = make_param(w, rows, cols, true, 5000 + rep);
        Tensor eff = nn::spectral_normalize(p, 20);
        const double top = testsupport::largest_singular_value(eff.data, rows, cols);
        CHECK(top > 0.95);
        CHECK(top < 1.05);
    }
}

TEST_CASE("he init is deterministic per seed")
{
    Tensor a = nn::he_conv_init(4, 3, 3, 3, 3, 42);
    Tensor b = nn::he_conv_init(4, 3, 3, 3, 3, 42);
    CHECK(a.data == b.data);
    Tensor c = nn::he_conv_init(4, 3, 3, 3, 3, 43);
    CHECK(a.data != c.data);

    // fan-in scaling: sample std near sqrt(2 / fan_in)
    Tensor big = nn::he_conv_init(64, 32, 3, 3, 3, 7);
    double sq = 0.0;
    for (float v : big.data)
        sq += double(v) * v;
    const double std_est = std::sqrt(sq / double(big.data.size()));
    CHECK(std_est == doctest::Approx(std::sqrt(2.0 / (32 * 27))).epsilon(0.05));
}
