#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ctnorm/error.hpp"
#include "ctnorm/rng.hpp"
#include "ctnorm/volume.hpp"

using namespace ctnorm;

namespace {

std::filesystem::path temp_file(const char* name)
{
    auto dir = std::filesystem::temp_directory_path() / "ctnorm_test_volume";
    std::filesystem::create_directories(dir);
    return dir / name;
}

Volume random_volume(StreamRng& rng, int max_dim = 16)
{
    Volume v(1 + int(rng.below(uint64_t(max_dim))), 1 + int(rng.below(uint64_t(max_dim))),
             1 + int(rng.below(uint64_t(max_dim))), 0.5f, 1.0f, 1.0f);
    for (auto& x : v.voxels)
        x = float(rng.normal() * 500.0);
    return v;
}

} // namespace

TEST_CASE("hu_to_unit endpoints and midpoint")
{
    CHECK(hu_to_unit(-1024.0f) == doctest::Approx(0.0));
    CHECK(hu_to_unit(3071.0f) == doctest::Approx(1.0));
    CHECK(hu_to_unit(0.0f) == doctest::Approx(1024.0 / 4095.0).epsilon(1e-6));
    // clamping
    CHECK(hu_to_unit(-2000.0f) == 0.0f);
    CHECK(hu_to_unit(5000.0f) == 1.0f);
}

TEST_CASE("hu_to_unit monotone and invertible in range")
{
    StreamRng rng(7);
    float prev = hu_to_unit(kHuMin);
    for (int i = 1; i <= 200; ++i) {
        const float hu = kHuMin + kHuRange * float(i) / 200.0f;
        const float u = hu_to_unit(hu);
        CHECK(u >= prev);
        prev = u;
    }
    for (int i = 0; i < 100; ++i) {
        const float hu = float(kHuMin + rng.uniform() * kHuRange);
        const float back = unit_to_hu(hu_to_unit(hu));
        CHECK(back == doctest::Approx(hu).epsilon(1e-5));
    }
}

TEST_CASE("extract_plane_slices shape contract")
{
    Volume v(32, 64, 48);
    CHECK(plane_slice_count(v, Plane::Axial) == 32);
    CHECK(plane_slice_count(v, Plane::Coronal) == 64);
    CHECK(plane_slice_count(v, Plane::Sagittal) == 48);

    auto ax = extract_plane_slices(v, Plane::Axial);
    REQUIRE(ax.size() == 32);
    CHECK(ax[0].h == 64);
    CHECK(ax[0].w == 48);

    auto sa = extract_plane_slices(v, Plane::Sagittal);
    REQUIRE(sa.size() == 48);
    CHECK(sa[0].h == 32);
    CHECK(sa[0].w == 64);

    auto co = extract_plane_slices(v, Plane::Coronal);
    REQUIRE(co.size() == 64);
    CHECK(co[0].h == 32);
    CHECK(co[0].w == 48);
}

TEST_CASE("single-voxel volume slices")
{
    Volume v(1, 1, 1);
    v.at(0, 0, 0) = 42.0f;
    for (Plane p : {Plane::Axial, Plane::Coronal, Plane::Sagittal}) {
        auto slices = extract_plane_slices(v, p);
        REQUIRE(slices.size() == 1);
        CHECK(slices[0].h == 1);
        CHECK(slices[0].w == 1);
        CHECK(slices[0].at(0, 0) == 42.0f);
    }
}

TEST_CASE("plane extraction conserves voxel sums")
{
    StreamRng rng(11);
    Volume v = random_volume(rng);
    double vol_sum = 0.0;
    for (float x : v.voxels)
        vol_sum += x;
    for (Plane p : {Plane::Axial, Plane::Coronal, Plane::Sagittal}) {
        double s = 0.0;
        for (const auto& im : extract_plane_slices(v, p))
            for (float x : im.pix)
                s += x;
        CHECK(s == doctest::Approx(vol_sum).epsilon(1e-9));
    }
}

TEST_CASE("crop_roi")
{
    Volume v(32, 512, 512);
    StreamRng rng(3);
    for (auto& x : v.voxels)
        x = float(rng.uniform());

    SUBCASE("identity crop")
    {
        Volume c = crop_roi(v, {0, 0, 0, 32, 512, 512});
        CHECK(c.voxels == v.voxels);
    }
    SUBCASE("paper roi extent")
    {
        Volume c = crop_roi(v, {1, 100, 200, 30, 64, 64});
        CHECK(c.nz == 30);
        CHECK(c.ny == 64);
        CHECK(c.nx == 64);
        CHECK(c.at(0, 0, 0) == v.at(1, 100, 200));
        CHECK(c.at(29, 63, 63) == v.at(30, 163, 263));
    }
    SUBCASE("off-by-one bounds violation names z")
    {
        CHECK_THROWS_WITH_AS(crop_roi(v, {31, 0, 0, 2, 1, 1}), doctest::Contains("on z"),
                             BoundsError);
    }
    SUBCASE("y and x violations")
    {
        CHECK_THROWS_AS(crop_roi(v, {0, 511, 0, 1, 2, 1}), BoundsError);
        CHECK_THROWS_AS(crop_roi(v, {0, 0, -1, 1, 1, 1}), BoundsError);
    }
}

TEST_CASE("resample_z_nearest pairs each output slice with the containing thick slice")
{
    Volume v(4, 2, 2, 2.0f);
    for (int z = 0; z < 4; ++z)
        for (int i = 0; i < 4; ++i)
            v.voxels[size_t(z) * 4 + i] = float(z);
    Volume r = resample_z_nearest(v, 8);
    CHECK(r.nz == 8);
    for (int z = 0; z < 8; ++z)
        CHECK(r.at(z, 0, 0) == doctest::Approx(double(z / 2)));
}

TEST_CASE("save/load round trip is bit-identical")
{
    StreamRng rng(1234);
    for (int rep = 0; rep < 20; ++rep) {
        Volume v = random_volume(rng);
        const auto path = temp_file("roundtrip.ctv");
        save_volume(v, path);
        Volume r = load_volume(path);
        CHECK(r.nz == v.nz);
        CHECK(r.ny == v.ny);
        CHECK(r.nx == v.nx);
        CHECK(r.sz == v.sz);
        CHECK(std::memcmp(r.voxels.data(), v.voxels.data(), v.voxels.size() * sizeof(float)) == 0);
    }
}

TEST_CASE("load_volume error paths")
{
    SUBCASE("bad magic")
    {
        const auto path = temp_file("bad_magic.ctv");
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "XXXXXX" << std::string(64, '\0');
        out.close();
        CHECK_THROWS_WITH_AS(load_volume(path), doctest::Contains("bad magic"), ParseError);
    }
    SUBCASE("declared dims exceed payload")
    {
        Volume v(2, 2, 2);
        const auto path = temp_file("truncated.ctv");
        save_volume(v, path);
        // chop off half the payload
        const auto full = std::filesystem::file_size(path);
        std::filesystem::resize_file(path, full - 4 * sizeof(float));
        CHECK_THROWS_WITH_AS(load_volume(path), doctest::Contains("shorter"), ParseError);
    }
    SUBCASE("payload longer than dims declare")
    {
        Volume v(2, 2, 2);
        const auto path = temp_file("overlong.ctv");
        save_volume(v, path);
        std::ofstream out(path, std::ios::binary | std::ios::app);
        const float extra = 1.0f;
        out.write(reinterpret_cast<const char*>(&extra), sizeof(extra));
        out.close();
        CHECK_THROWS_WITH_AS(load_volume(path), doctest::Contains("longer"), ParseError);
    }
    SUBCASE("missing file")
    {
        CHECK_THROWS_AS(load_volume(temp_file("does_not_exist.ctv")), IoError);
    }
}

TEST_CASE("volume validate rejects non-finite voxels")
{
    Volume v(2, 2, 2);
    v.at(1, 1, 1) = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(v.validate(), DomainError);
}
