// Whole-pipeline determinism: the same manifest run twice in deterministic
// mode (single thread, zeroed wall times) must produce byte-identical
// volumes, checkpoints, and reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <vector>

#include "ctnorm/pipeline.hpp"
#include "ctnorm/threading.hpp"

using namespace ctnorm;
using namespace ctnorm::pipeline;
namespace fs = std::filesystem;

namespace {

Manifest small_manifest(const fs::path& root)
{
    Manifest m;
    m.root = root;
    m.seed = 0xD10;
    m.n_cases = 4;
    m.train_cases = {0, 1};
    m.val_cases = {2};
    m.test_cases = {3};
    m.phantom.nx = 32;
    m.phantom.ny = 32;
    m.phantom.nz_half = 32;
    m.phantom.body_semi_x_mm = 14.0;
    m.phantom.body_semi_y_mm = 11.0;
    m.phantom.lungs = {{{0, 0, -6}, {7, 6, 4.5}}, {{0, 0, 6}, {7, 6, 4.5}}};
    m.phantom.vessel_count = 4;
    m.phantom.nodules = {{{0, 0, -6}, 1.5, 40.0, -350.0, true}};
    m.phantom.roi_dz = 6;
    m.phantom.roi_hw = 32;
    m.n_angles = 48;
    m.scenarios = {{"B", 0.25, 2.0}};
    m.generator.n_resblocks = 2;
    m.generator.channels = 8;
    m.discriminator.n_stages = 2;
    m.discriminator.base_channels = 8;
    m.train.batch = 2;
    m.train.iterations = 40;
    m.train.patch_d = 4;
    m.train.patch_h = 32;
    m.train.patch_w = 32;
    m.train.val_every = 20;
    m.train.checkpoint_every = 20;
    m.tile = {8, 32, 32};
    m.z_overlap = 4;
    return m;
}

void run_pipeline(const Manifest& m)
{
    StageOptions opt;
    opt.overwrite = Overwrite::Force;
    opt.deterministic = true;
    run_phantom(m, opt);
    run_scan(m, opt);
    run_train(m, "B", false, opt);
    run_train(m, "B", true, opt);
    run_normalize(m, "B", "gan", opt);
    run_normalize(m, "B", "cnn", opt);
    run_evaluate(m, opt);
}

std::map<std::string, std::vector<char>> snapshot(const fs::path& root)
{
    std::map<std::string, std::vector<char>> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file())
            continue;
        std::ifstream in(e.path(), std::ios::binary);
        files[fs::relative(e.path(), root).string()] = {std::istreambuf_iterator<char>(in),
                                                        std::istreambuf_iterator<char>()};
    }
    return files;
}

} // namespace

int main()
{
    set_threads(1);
    const fs::path base = "acceptance_runs/determinism";
    fs::remove_all(base);

    Manifest ma = small_manifest(base / "run_a");
    Manifest mb = small_manifest(base / "run_b");
    std::printf("determinism: full pipeline twice, %d cases, %d iterations per model, 1 thread\n",
                ma.n_cases, ma.train.iterations);
    run_pipeline(ma);
    run_pipeline(mb);

    const auto fa = snapshot(ma.root);
    const auto fb = snapshot(mb.root);

    bool ok = fa.size() == fb.size();
    size_t bytes = 0;
    std::string first_diff;
    for (const auto& [rel, data] : fa) {
        const auto it = fb.find(rel);
        if (it == fb.end() || it->second != data) {
            ok = false;
            if (first_diff.empty())
                first_diff = rel;
        }
        bytes += data.size();
    }
    std::printf("[%s] criterion 10: %zu files, %.1f MB compared byte-for-byte%s%s\n",
                ok ? "PASS" : "FAIL", fa.size(), double(bytes) / 1e6,
                ok ? "" : ", first difference: ", first_diff.c_str());
    return ok ? 0 : 1;
}
