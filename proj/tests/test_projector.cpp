#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ctnorm/error.hpp"
#include "ctnorm/projector.hpp"
#include "ctnorm/rng.hpp"

using namespace ctnorm;

namespace {

// disk with a half-pixel cosine edge so ray integrals are smooth
Image2D disk_image(int n, double radius_mm, double pixel_mm, float value)
{
    Image2D im(n, n);
    const double c = 0.5 * (n - 1);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double d = std::hypot((x - c) * pixel_mm, (y - c) * pixel_mm) - radius_mm;
            const double h = 0.5 * pixel_mm;
            double w = 0.0;
            if (d <= -h)
                w = 1.0;
            else if (d < h)
                w = 0.5 * (1.0 + std::cos(M_PI * (d + h) / (2.0 * h)));
            im.at(y, x) = float(value * w);
        }
    return im;
}

} // namespace

TEST_CASE("forward_project rejects non-square images")
{
    Image2D rect(8, 10, 0.0f);
    CHECK_THROWS_AS(forward_project(rect, 1.0f, 8, 1.0f), ShapeError);
}

TEST_CASE("all-zero image projects to all-zero sinogram")
{
    Image2D zero(32, 32, 0.0f);
    Image2D sino = forward_project(zero, 1.0f, 16, 1.0f);
    for (float v : sino.pix)
        CHECK(v == 0.0f);
}

TEST_CASE("center ray through a disk integrates to the chord length")
{
    const int n = 64;
    const double r = 20.0, mu = 0.02;
    Image2D disk = disk_image(n, r, 1.0, float(mu));
    const int n_angles = 24;
    Image2D sino = forward_project(disk, 1.0f, n_angles, 1.0f);
    const int center = (sino.w - 1) / 2; // odd detector count
    const double expect = 2.0 * r * mu;
    for (int a = 0; a < n_angles; ++a)
        CHECK(std::abs(sino.at(a, center) - expect) / expect < 0.02);
}

TEST_CASE("line integrals are linear")
{
    StreamRng rng(3);
    Image2D a(24, 24), b(24, 24);
    for (size_t i = 0; i < a.pix.size(); ++i) {
        a.pix[i] = float(rng.uniform() * 0.02);
        b.pix[i] = float(rng.uniform() * 0.02);
    }
    Image2D ab(24, 24);
    for (size_t i = 0; i < a.pix.size(); ++i)
        ab.pix[i] = a.pix[i] + b.pix[i];
    Image2D pa = forward_project(a, 1.0f, 12, 1.0f);
    Image2D pb = forward_project(b, 1.0f, 12, 1.0f);
    Image2D pab = forward_project(ab, 1.0f, 12, 1.0f);
    for (size_t i = 0; i < pa.pix.size(); ++i)
        CHECK(pab.pix[i] == doctest::Approx(pa.pix[i] + pb.pix[i]).epsilon(1e-4));
}

TEST_CASE("parallel projector matches the serial reference")
{
    Image2D disk = disk_image(32, 10.0, 1.0, 0.02f);
    Image2D par = forward_project(disk, 1.0f, 16, 1.0f);
    Image2D ser = ref::forward_project(disk, 1.0f, 16, 1.0f);
    REQUIRE(par.pix.size() == ser.pix.size());
    for (size_t i = 0; i < par.pix.size(); ++i)
        CHECK(par.pix[i] == doctest::Approx(ser.pix[i]).epsilon(1e-6));
}

TEST_CASE("zero sinogram reconstructs to a zero image")
{
    Image2D sino(32, 47, 0.0f);
    Image2D rec = fbp_reconstruct(sino, Window::Hann, 32, 1.0f, 1.0f);
    for (float v : rec.pix)
        CHECK(v == 0.0f);
}

TEST_CASE("fbp is linear")
{
    Image2D disk = disk_image(32, 9.0, 1.0, 0.02f);
    Image2D sino = forward_project(disk, 1.0f, 48, 1.0f);
    Image2D sino2 = sino;
    for (auto& v : sino2.pix)
        v *= 2.0f;
    Image2D r1 = fbp_reconstruct(sino, Window::Hann, 32, 1.0f, 1.0f);
    Image2D r2 = fbp_reconstruct(sino2, Window::Hann, 32, 1.0f, 1.0f);
    for (size_t i = 0; i < r1.pix.size(); ++i)
        CHECK(r2.pix[i] == doctest::Approx(2.0 * r1.pix[i]).epsilon(1e-4));
}

TEST_CASE("project-reconstruct round trip: 64x64 disk, 180 angles, interior RMSE < 5%")
{
    const int n = 64;
    const double r = 20.0, mu = 0.02;
    Image2D disk = disk_image(n, r, 1.0, float(mu));
    Image2D sino = forward_project(disk, 1.0f, 180, 1.0f);
    Image2D rec = fbp_reconstruct(sino, Window::Hann, n, 1.0f, 1.0f);

    const double c = 0.5 * (n - 1);
    double se = 0.0;
    int count = 0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            if (std::hypot(x - c, y - c) <= r - 2.0) {
                const double d = rec.at(y, x) - mu;
                se += d * d;
                ++count;
            }
    REQUIRE(count > 500);
    const double rmse = std::sqrt(se / count);
    CHECK(rmse / mu < 0.05);
}

TEST_CASE("backprojection of a one-hot sinogram is nonnegative and peaks on its ray")
{
    const int n = 33, n_angles = 16;
    const int nd = default_detector_count(n);
    Image2D sino(n_angles, nd, 0.0f);
    const int a = 4; // theta = pi/4
    const int det = (nd - 1) / 2;
    sino.at(a, det) = 1.0f;
    Image2D bp = backproject(sino, n, 1.0f, 1.0f);

    double mx = 0.0;
    int my = 0, mxx = 0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            CHECK(bp.at(y, x) >= 0.0f);
            if (bp.at(y, x) > mx) {
                mx = bp.at(y, x);
                my = y;
                mxx = x;
            }
        }
    REQUIRE(mx > 0.0);

    // the peak pixel must lie on the hot ray: |x cos + y sin - s| small
    const double theta = M_PI * double(a) / double(n_angles);
    const double s_mm = (double(det) - 0.5 * (nd - 1)) * 1.0;
    const double half = 0.5 * (n - 1);
    const double dist =
        std::abs((mxx - half) * std::cos(theta) + (my - half) * std::sin(theta) - s_mm);
    CHECK(dist <= 1.0);

    // pixels far from the ray carry no energy
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double d =
                std::abs((x - half) * std::cos(theta) + (y - half) * std::sin(theta) - s_mm);
            if (d > 3.0)
                CHECK(bp.at(y, x) == doctest::Approx(0.0).epsilon(1e-9));
        }
}

TEST_CASE("window selection")
{
    CHECK(window_from_name("ramp") == Window::Ramp);
    CHECK(window_from_name("hann") == Window::Hann);
    CHECK(window_from_name("shepp-logan") == Window::SheppLogan);
    CHECK_THROWS_AS(window_from_name("bogus"), ConfigError);

    // hann suppresses high frequencies relative to the plain ramp
    Image2D disk = disk_image(48, 14.0, 1.0, 0.02f);
    Image2D sino = forward_project(disk, 1.0f, 96, 1.0f);
    Image2D ramp = fbp_reconstruct(sino, Window::Ramp, 48, 1.0f, 1.0f);
    Image2D hann = fbp_reconstruct(sino, Window::Hann, 48, 1.0f, 1.0f);
    double var_ramp = 0.0, var_hann = 0.0;
    for (size_t i = 0; i < ramp.pix.size(); ++i) {
        var_ramp += ramp.pix[i] * ramp.pix[i];
        var_hann += hann.pix[i] * hann.pix[i];
    }
    CHECK(var_hann < var_ramp); // smoother kernel, less energy
}

TEST_CASE("hu/mu conversions")
{
    CHECK(hu_to_mu(0.0f) == doctest::Approx(kMuWater));
    CHECK(hu_to_mu(-1000.0f) == doctest::Approx(0.0));
    CHECK(hu_to_mu(-1024.0f) == 0.0f); // clamps
    CHECK(mu_to_hu(hu_to_mu(500.0f)) == doctest::Approx(500.0).epsilon(1e-5));
}
