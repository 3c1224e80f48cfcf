#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ctnorm/error.hpp"
#include "ctnorm/ops.hpp"
#include "ctnorm/reduce.hpp"
#include "ctnorm/rng.hpp"
#include "ctnorm/threading.hpp"
#include "support/fd_check.hpp"

using namespace ctnorm;
using testsupport::fd_check;
using testsupport::fill_normal;

TEST_CASE("1x1x1 identity convolution passes the input through")
{
    Tensor x(1, 1, 2, 3, 4);
    fill_normal(x, 1);
    Tensor w(1, 1, 1, 1, 1);
    w.data[0] = 1.0f;
    std::vector<float> b{0.0f};
    Tensor y;
    nn::conv3d_forward(x, w, b, 1, 0, y);
    REQUIRE(y.shape == x.shape);
    for (size_t i = 0; i < x.data.size(); ++i)
        CHECK(y.data[i] == doctest::Approx(x.data[i]));
}

TEST_CASE("hand-computed dot product: kernel (2,1,1), values (1,2) on input (3,5)")
{
    Tensor x(1, 1, 2, 1, 1);
    x.data = {3.0f, 5.0f};
    Tensor w(1, 1, 2, 1, 1);
    w.data = {1.0f, 2.0f};
    std::vector<float> b{0.0f};
    Tensor y;
    nn::conv3d_forward(x, w, b, 1, 0, y);
    REQUIRE(y.count() == 1);
    CHECK(y.data[0] == doctest::Approx(13.0));
}

TEST_CASE("conv3d shape contract and validation")
{
    Tensor x(2, 3, 4, 6, 6);
    Tensor w(5, 3, 3, 3, 3);
    std::vector<float> b(5, 0.0f);
    Tensor y;
    nn::conv3d_forward(x, w, b, 2, 1, y);
    CHECK(y.shape == std::array<int, 5>{2, 5, 2, 3, 3});

    Tensor w_bad(5, 4, 3, 3, 3);
    CHECK_THROWS_AS(nn::conv3d_forward(x, w_bad, b, 1, 1, y), ShapeError);
    std::vector<float> b_bad(4, 0.0f);
    CHECK_THROWS_AS(nn::conv3d_forward(x, w, b_bad, 1, 1, y), ShapeError);
    Tensor tiny(1, 1, 1, 1, 1);
    Tensor wk(1, 1, 3, 3, 3);
    std::vector<float> b1(1, 0.0f);
    CHECK_THROWS_AS(nn::conv3d_forward(tiny, wk, b1, 1, 0, y), ShapeError);
}

TEST_CASE("fast 3x3x3 path agrees with the serial reference")
{
    StreamRng rng(17);
    for (int rep = 0; rep < 6; ++rep) {
        const int N = 1 + int(rng.below(2)), Cin = 1 + int(rng.below(4));
        const int Cout = 1 + int(rng.below(5));
        const int D = 2 + int(rng.below(4)), H = 3 + int(rng.below(30)),
                  W = 3 + int(rng.below(62));
        Tensor x(N, Cin, D, H, W), w(Cout, Cin, 3, 3, 3);
        fill_normal(x, 100 + rep);
        fill_normal(w, 200 + rep, 0.3);
        std::vector<float> b(static_cast<size_t>(Cout), 0.0f);
        for (auto& v : b)
            v = float(rng.normal());

        Tensor y_fast, y_ref;
        nn::conv3d_forward(x, w, b, 1, 1, y_fast);
        nn::ref::conv3d_forward(x, w, b, 1, 1, y_ref);
        REQUIRE(y_fast.shape == y_ref.shape);
        for (size_t i = 0; i < y_fast.data.size(); ++i)
            CHECK(y_fast.data[i] == doctest::Approx(y_ref.data[i]).epsilon(1e-4));

        Tensor dy;
        dy.resize_like(y_fast);
        fill_normal(dy, 300 + rep);

        Tensor dx_fast, dx_ref;
        nn::conv3d_backward_input(dy, w, 1, 1, x.shape, dx_fast);
        nn::ref::conv3d_backward_input(dy, w, 1, 1, x.shape, dx_ref);
        for (size_t i = 0; i < dx_fast.data.size(); ++i)
            CHECK(dx_fast.data[i] == doctest::Approx(dx_ref.data[i]).epsilon(1e-3));

        Tensor dw_fast(Cout, Cin, 3, 3, 3), dw_ref(Cout, Cin, 3, 3, 3);
        std::vector<float> db_fast(static_cast<size_t>(Cout), 0.0f), db_ref(static_cast<size_t>(Cout), 0.0f);
        nn::conv3d_backward_weight(x, dy, 1, 1, dw_fast, db_fast);
        nn::ref::conv3d_backward_weight(x, dy, 1, 1, dw_ref, db_ref);
        for (size_t i = 0; i < dw_fast.data.size(); ++i)
            CHECK(dw_fast.data[i] == doctest::Approx(dw_ref.data[i]).epsilon(1e-3));
        for (size_t i = 0; i < db_fast.size(); ++i)
            CHECK(db_fast[i] == doctest::Approx(db_ref[i]).epsilon(1e-3));
    }
}

TEST_CASE("strided conv agrees with the serial reference")
{
    StreamRng rng(31);
    Tensor x(2, 3, 5, 9, 11), w(4, 3, 3, 3, 3);
    fill_normal(x, 1);
    fill_normal(w, 2, 0.3);
    std::vector<float> b(4, 0.25f);
    Tensor y_fast, y_ref;
    nn::conv3d_forward(x, w, b, 2, 1, y_fast);
    nn::ref::conv3d_forward(x, w, b, 2, 1, y_ref);
    REQUIRE(y_fast.shape == y_ref.shape);
    for (size_t i = 0; i < y_fast.data.size(); ++i)
        CHECK(y_fast.data[i] == doctest::Approx(y_ref.data[i]).epsilon(1e-4));

    Tensor dy;
    dy.resize_like(y_fast);
    fill_normal(dy, 3);
    Tensor dx_fast, dx_ref;
    nn::conv3d_backward_input(dy, w, 2, 1, x.shape, dx_fast);
    nn::ref::conv3d_backward_input(dy, w, 2, 1, x.shape, dx_ref);
    for (size_t i = 0; i < dx_fast.data.size(); ++i)
        CHECK(dx_fast.data[i] == doctest::Approx(dx_ref.data[i]).epsilon(1e-3));
}

TEST_CASE("conv3d gradients match finite differences")
{
    StreamRng rng(53);
    for (int rep = 0; rep < 4; ++rep) {
        const int N = 1, Cin = 1 + int(rng.below(3)), Cout = 1 + int(rng.below(3));
        const int D = 2 + int(rng.below(3)), H = 4 + int(rng.below(4)), W = 4 + int(rng.below(4));
        const int stride = 1 + int(rng.below(2));
        Tensor x(N, Cin, D, H, W), w(Cout, Cin, 3, 3, 3);
        fill_normal(x, 500 + rep);
        fill_normal(w, 600 + rep, 0.4);
        std::vector<float> b(size_t(Cout), 0.1f);

        Tensor y, lw;
        nn::conv3d_forward(x, w, b, stride, 1, y);
        lw.resize_like(y);
        fill_normal(lw, 700 + rep);

        auto loss = [&]() {
            Tensor yy;
            nn::conv3d_forward(x, w, b, stride, 1, yy);
            double s = 0.0;
            for (size_t i = 0; i < yy.data.size(); ++i)
                s += double(yy.data[i]) * lw.data[i];
            return s;
        };

        // analytic gradients for the weighted-sum loss
        Tensor dx, dw(Cout, Cin, 3, 3, 3);
        std::vector<float> db(static_cast<size_t>(Cout), 0.0f);
        nn::conv3d_backward_input(lw, w, stride, 1, x.shape, dx);
        nn::conv3d_backward_weight(x, lw, stride, 1, dw, db);

        auto rep_x = fd_check(x, loss, dx.data, 20, 800 + rep);
        CHECK(rep_x.max_rel_err < 1e-2);
        auto rep_w = fd_check(w, loss, dw.data, 20, 900 + rep);
        CHECK(rep_w.max_rel_err < 1e-2);
    }
}

TEST_CASE("leaky_relu values and gradient")
{
    Tensor x(1, 1, 1, 1, 4);
    x.data = {2.0f, -1.0f, 0.0f, 3.5f};
    Tensor y;
    nn::leaky_relu_forward(x, 0.2f, y);
    CHECK(y.data[0] == doctest::Approx(2.0));
    CHECK(y.data[1] == doctest::Approx(-0.2));
    CHECK(y.data[2] == doctest::Approx(0.0));
    CHECK(y.data[3] == doctest::Approx(3.5));

    CHECK_THROWS_AS(nn::leaky_relu_forward(x, 1.5f, y), DomainError);

    Tensor big(1, 2, 3, 5, 7);
    fill_normal(big, 42);
    Tensor lw;
    nn::leaky_relu_forward(big, 0.2f, lw);
    fill_normal(lw, 43);
    auto loss = [&]() {
        Tensor yy;
        nn::leaky_relu_forward(big, 0.2f, yy);
        double s = 0.0;
        for (size_t i = 0; i < yy.data.size(); ++i)
            s += double(yy.data[i]) * lw.data[i];
        return s;
    };
    Tensor grad;
    nn::leaky_relu_backward(big, lw, 0.2f, grad);
    auto repo = fd_check(big, loss, grad.data, 30, 44, 1e-3);
    CHECK(repo.max_rel_err < 1e-2);
}

TEST_CASE("z_upshuffle shape, bijection, conservation")
{
    Tensor x(1, 2, 4, 8, 8);
    fill_normal(x, 5);
    Tensor y;
    nn::z_upshuffle_forward(x, y);
    CHECK(y.shape == std::array<int, 5>{1, 1, 8, 8, 8});

    // channel r of depth d lands at depth 2d + r
    CHECK(y.at(0, 0, 0, 3, 3) == x.at(0, 0, 0, 3, 3));
    CHECK(y.at(0, 0, 1, 3, 3) == x.at(0, 1, 0, 3, 3));
    CHECK(y.at(0, 0, 6, 2, 1) == x.at(0, 0, 3, 2, 1));
    CHECK(y.at(0, 0, 7, 2, 1) == x.at(0, 1, 3, 2, 1));

    // inverse rearrangement restores the input exactly
    Tensor back;
    nn::z_upshuffle_backward(y, back);
    REQUIRE(back.shape == x.shape);
    for (size_t i = 0; i < x.data.size(); ++i)
        CHECK(back.data[i] == x.data[i]);

    // rearrangement conserves the element sum and the norm
    CHECK(det_sum(y.data) == doctest::Approx(det_sum(x.data)));
    CHECK(det_sq_sum(y.data) == doctest::Approx(det_sq_sum(x.data)));

    Tensor odd(1, 3, 2, 2, 2);
    Tensor out;
    CHECK_THROWS_AS(nn::z_upshuffle_forward(odd, out), ShapeError);
}

TEST_CASE("global average pool and linear head gradients")
{
    StreamRng rng(61);
    Tensor x(3, 4, 2, 3, 3);
    fill_normal(x, 1);
    Tensor pooled;
    nn::global_avg_pool_forward(x, pooled);
    CHECK(pooled.shape == std::array<int, 5>{3, 4, 1, 1, 1});
    double manual = 0.0;
    for (int d = 0; d < 2; ++d)
        for (int h = 0; h < 3; ++h)
            for (int w = 0; w < 3; ++w)
                manual += x.at(1, 2, d, h, w);
    CHECK(pooled.at(1, 2, 0, 0, 0) == doctest::Approx(manual / 18.0));

    Tensor fw(1, 4, 1, 1, 1);
    fill_normal(fw, 2, 0.5);
    std::vector<float> fb{0.3f};

    Tensor lw(3, 1, 1, 1, 1);
    fill_normal(lw, 3);
    auto loss = [&]() {
        Tensor p, s;
        nn::global_avg_pool_forward(x, p);
        nn::linear_forward(p, fw, fb, s);
        double acc = 0.0;
        for (size_t i = 0; i < s.data.size(); ++i)
            acc += double(s.data[i]) * lw.data[i];
        return acc;
    };

    Tensor p, s;
    nn::global_avg_pool_forward(x, p);
    nn::linear_forward(p, fw, fb, s);
    Tensor dp, dxp;
    nn::linear_backward_input(lw, fw, dp);
    nn::global_avg_pool_backward(dp, x.shape, dxp);
    auto rx = fd_check(x, loss, dxp.data, 25, 71, 1e-3);
    CHECK(rx.max_rel_err < 1e-2);

    Tensor dfw(1, 4, 1, 1, 1);
    std::vector<float> dfb(1);
    nn::linear_backward_weight(p, lw, dfw, dfb);
    auto rw = fd_check(fw, loss, dfw.data, 4, 72, 1e-3);
    CHECK(rw.max_rel_err < 1e-2);
}

TEST_CASE("l1 loss values and subgradient")
{
    Tensor a(1, 1, 1, 1, 2), b(1, 1, 1, 1, 2);
    a.data = {0.0f, 0.0f};
    b.data = {1.0f, -1.0f};
    CHECK(nn::l1_loss(a, a) == doctest::Approx(0.0));
    CHECK(nn::l1_loss(a, b) == doctest::Approx(1.0));

    Tensor bad(1, 1, 1, 1, 3);
    CHECK_THROWS_AS(nn::l1_loss(a, bad), ShapeError);

    // gradient check away from ties
    Tensor x(1, 1, 2, 4, 4), y(1, 1, 2, 4, 4);
    fill_normal(x, 7);
    fill_normal(y, 8);
    auto loss = [&]() { return nn::l1_loss(x, y); };
    Tensor g;
    nn::l1_loss_backward(x, y, 1.0f, g);
    auto repo = fd_check(x, loss, g.data, 25, 9, 1e-4);
    CHECK(repo.max_rel_err < 1e-2);

    // subgradient zero at exact ties
    Tensor t1(1, 1, 1, 1, 2), t2(1, 1, 1, 1, 2);
    t1.data = {0.5f, 0.25f};
    t2.data = {0.5f, 0.75f};
    Tensor gt;
    nn::l1_loss_backward(t1, t2, 1.0f, gt);
    CHECK(gt.data[0] == 0.0f);
    CHECK(gt.data[1] == doctest::Approx(-0.5));
}

TEST_CASE("kernels are deterministic across repeated runs")
{
    Tensor x(2, 8, 4, 16, 16), w(8, 8, 3, 3, 3);
    fill_normal(x, 11);
    fill_normal(w, 12, 0.2);
    std::vector<float> b(8, 0.01f);
    Tensor y1, y2;
    nn::conv3d_forward(x, w, b, 1, 1, y1);
    nn::conv3d_forward(x, w, b, 1, 1, y2);
    CHECK(std::memcmp(y1.data.data(), y2.data.data(), y1.data.size() * sizeof(float)) == 0);

    Tensor dw1(8, 8, 3, 3, 3), dw2(8, 8, 3, 3, 3);
    std::vector<float> db1(8), db2(8);
    nn::conv3d_backward_weight(x, y1, 1, 1, dw1, db1);
    nn::conv3d_backward_weight(x, y1, 1, 1, dw2, db2);
    CHECK(std::memcmp(dw1.data.data(), dw2.data.data(), dw1.data.size() * sizeof(float)) == 0);
}

TEST_CASE("kernel results are independent of the thread count")
{
    Tensor x(2, 8, 4, 16, 32), w(8, 8, 3, 3, 3), ws2(8, 8, 3, 3, 3);
    fill_normal(x, 21);
    fill_normal(w, 22, 0.2);
    fill_normal(ws2, 23, 0.2);
    std::vector<float> b(8, 0.05f);

    set_threads(2);
    Tensor y2, dw2(8, 8, 3, 3, 3), dx2;
    std::vector<float> db2(8, 0.0f);
    nn::conv3d_forward(x, w, b, 1, 1, y2);
    nn::conv3d_backward_weight(x, y2, 1, 1, dw2, db2);
    nn::conv3d_backward_input(y2, w, 1, 1, x.shape, dx2);
    Tensor s2f, s2w(8, 8, 3, 3, 3), s2x;
    std::vector<float> s2b(8, 0.0f);
    nn::conv3d_forward(x, ws2, b, 2, 1, s2f);
    nn::conv3d_backward_weight(x, s2f, 2, 1, s2w, s2b);
    nn::conv3d_backward_input(s2f, ws2, 2, 1, x.shape, s2x);
    const double sum2 = det_sum(y2.data);

    set_threads(1);
    Tensor y1, dw1(8, 8, 3, 3, 3), dx1;
    std::vector<float> db1(8, 0.0f);
    nn::conv3d_forward(x, w, b, 1, 1, y1);
    nn::conv3d_backward_weight(x, y1, 1, 1, dw1, db1);
    nn::conv3d_backward_input(y1, w, 1, 1, x.shape, dx1);
    Tensor s1f, s1w(8, 8, 3, 3, 3), s1x;
    std::vector<float> s1b(8, 0.0f);
    nn::conv3d_forward(x, ws2, b, 2, 1, s1f);
    nn::conv3d_backward_weight(x, s1f, 2, 1, s1w, s1b);
    nn::conv3d_backward_input(s1f, ws2, 2, 1, x.shape, s1x);
    const double sum1 = det_sum(y1.data);
    set_threads(2);

    CHECK(std::memcmp(y1.data.data(), y2.data.data(), y1.data.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(dw1.data.data(), dw2.data.data(), dw1.data.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(dx1.data.data(), dx2.data.data(), dx1.data.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(s1f.data.data(), s2f.data.data(), s1f.data.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(s1w.data.data(), s2w.data.data(), s1w.data.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(s1x.data.data(), s2x.data.data(), s1x.data.size() * sizeof(float)) == 0);
    CHECK(sum1 == sum2); // fixed-block reduction
}
