// Exit-code contract of the installed binary, driven through std::system.
// CTNORM_BIN is injected by ctest.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "ctnorm/manifest.hpp"

using namespace ctnorm::pipeline;
namespace fs = std::filesystem;

namespace {

std::string binary()
{
    const char* b = std::getenv("CTNORM_BIN");
    REQUIRE_MESSAGE(b != nullptr, "CTNORM_BIN not set");
    return b;
}

int run(const std::string& args)
{
    const std::string cmd = binary() + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path fresh_dir()
{
    const auto dir = fs::temp_directory_path() / "ctnorm_test_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_tiny_manifest(const fs::path& dir)
{
    Manifest m;
    m.root = dir / "run";
    m.seed = 99;
    m.n_cases = 2;
    m.train_cases = {0};
    m.val_cases = {};
    m.test_cases = {1};
    m.phantom.nx = 32;
    m.phantom.ny = 32;
    m.phantom.nz_half = 8;
    m.phantom.body_semi_x_mm = 14.0;
    m.phantom.body_semi_y_mm = 11.0;
    m.phantom.lungs = {{{0, 0, -6}, {4, 6, 4.5}}, {{0, 0, 6}, {4, 6, 4.5}}};
    m.phantom.vessel_count = 2;
    m.phantom.nodules = {{{0, 0, -6}, 1.5, 40.0, -350.0, true}};
    m.phantom.roi_dz = 2;
    m.phantom.roi_hw = 16;
    m.n_angles = 24;
    m.scenarios = {{"B", 0.25, 2.0}};
    m.generator.n_resblocks = 1;
    m.generator.channels = 2;
    m.discriminator.n_stages = 1;
    m.discriminator.base_channels = 2;
    m.train.batch = 1;
    m.train.iterations = 2;
    m.train.patch_d = 2;
    m.train.patch_h = 16;
    m.train.patch_w = 16;
    m.train.val_every = 10;
    m.train.checkpoint_every = 2;
    m.tile = {2, 16, 16};
    m.z_overlap = 1;
    const auto path = dir / "manifest.json";
    save_manifest(m, path);
    return path;
}

} // namespace

TEST_CASE("no subcommand is a usage error")
{
    CHECK(run("") != 0);
}

TEST_CASE("missing manifest file exits 1")
{
    CHECK(run("phantom --manifest /nonexistent/m.json") == 1);
}

TEST_CASE("malformed manifest exits 3 (invalid config)")
{
    const auto dir = fresh_dir();
    std::ofstream out(dir / "bad.json");
    out << "{ \"cases\": { \"count\": -4 } }";
    out.close();
    CHECK(run("phantom --manifest " + (dir / "bad.json").string()) == 3);
}

TEST_CASE("phantom generates, then refuses to overwrite with exit 2")
{
    const auto dir = fresh_dir();
    const auto manifest = write_tiny_manifest(dir);
    CHECK(run("phantom --manifest " + manifest.string()) == 0);
    CHECK(fs::exists(dir / "run/cases/case00/phantom.ctv"));
    CHECK(run("phantom --manifest " + manifest.string()) == 2);
    CHECK(run("--force phantom --manifest " + manifest.string()) == 0);
}

TEST_CASE("train without scan data exits 1 naming the missing file")
{
    const auto dir = fresh_dir();
    const auto manifest = write_tiny_manifest(dir);
    REQUIRE(run("phantom --manifest " + manifest.string()) == 0);
    CHECK(run("train --scenario B --manifest " + manifest.string()) == 1);
    // unknown scenario is a config error
    CHECK(run("train --scenario Z --manifest " + manifest.string()) == 3);
}

TEST_CASE("normalize argument validation exits 3")
{
    const auto dir = fresh_dir();
    const auto manifest = write_tiny_manifest(dir);
    CHECK(run("normalize --manifest " + manifest.string()) == 3);
    CHECK(run("normalize --method xyz --scenario B --manifest " + manifest.string()) == 3);
}
