#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ctnorm/error.hpp"
#include "ctnorm/pipeline.hpp"
#include "ctnorm/threading.hpp"

using namespace ctnorm;

namespace {

struct GlobalArgs {
    std::string manifest_path;
    std::optional<uint64_t> seed;
    int threads = 0;
    bool force = false;
    bool deterministic = false;
};

pipeline::Manifest load(const GlobalArgs& g)
{
    if (g.manifest_path.empty())
        throw ConfigError("--manifest is required for this command");
    pipeline::Manifest m = pipeline::load_manifest(g.manifest_path);
    if (g.seed)
        m.seed = *g.seed;
    return m;
}

pipeline::StageOptions options(const GlobalArgs& g)
{
    pipeline::StageOptions opt;
    opt.overwrite = g.force ? pipeline::Overwrite::Force : pipeline::Overwrite::Fail;
    opt.deterministic = g.deterministic;
    opt.progress = &std::cerr;
    return opt;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"ctnorm: heterogeneous chest-CT normalization benchmark pipeline"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--manifest", g.manifest_path, "experiment manifest (JSON)");
    app.add_option("--seed", g.seed, "override the manifest seed");
    app.add_option("--threads", g.threads, "worker thread count");
    app.add_flag("--force", g.force, "overwrite existing outputs");
    app.add_flag("--deterministic", g.deterministic,
                 "single-threaded, reproducible byte-for-byte");

    auto* cmd_phantom = app.add_subcommand("phantom", "generate phantom volumes + ROI manifests");
    cmd_phantom->fallthrough();
    auto* cmd_scan = app.add_subcommand("scan", "simulate reference + scenario acquisitions");
    cmd_scan->fallthrough();
    bool keep_sino = false;
    cmd_scan->add_flag("--keep-sinograms", keep_sino, "also persist CTS1 sinograms");

    auto* cmd_train = app.add_subcommand("train", "train the normalizer for one scenario");
    cmd_train->fallthrough();
    std::string scenario;
    bool baseline_cnn = false;
    cmd_train->add_option("--scenario", scenario, "scenario id (e.g. B)")->required();
    cmd_train->add_flag("--baseline-cnn", baseline_cnn, "L1-only baseline (alpha1 = 0)");

    auto* cmd_normalize = app.add_subcommand("normalize", "apply a trained model");
    cmd_normalize->fallthrough();
    std::string n_scenario, n_method, n_ckpt, n_input, n_output;
    cmd_normalize->add_option("--scenario", n_scenario, "normalize all test cases of a scenario");
    cmd_normalize->add_option("--method", n_method, "gan or cnn (with --scenario)");
    cmd_normalize->add_option("--checkpoint", n_ckpt, "checkpoint file (single-volume mode)");
    cmd_normalize->add_option("--input", n_input, "input CTV1 volume (single-volume mode)");
    cmd_normalize->add_option("--output", n_output, "output CTV1 volume (single-volume mode)");

    auto* cmd_evaluate = app.add_subcommand("evaluate", "metrics + radiomics + stats report");
    cmd_evaluate->fallthrough();
    auto* cmd_report = app.add_subcommand("report", "print stored evaluation results");
    cmd_report->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (g.deterministic)
            set_threads(1);
        else if (g.threads > 0)
            set_threads(g.threads);

        if (cmd_phantom->parsed()) {
            pipeline::run_phantom(load(g), options(g));
        } else if (cmd_scan->parsed()) {
            auto opt = options(g);
            opt.keep_sinograms = keep_sino;
            pipeline::run_scan(load(g), opt);
        } else if (cmd_train->parsed()) {
            pipeline::run_train(load(g), scenario, baseline_cnn, options(g));
        } else if (cmd_normalize->parsed()) {
            if (!n_ckpt.empty() || !n_input.empty() || !n_output.empty()) {
                if (n_ckpt.empty() || n_input.empty() || n_output.empty())
                    throw ConfigError(
                        "single-volume mode needs --checkpoint, --input and --output");
                std::array<int, 3> tile{8, 32, 32};
                int z_overlap = 4;
                if (!g.manifest_path.empty()) {
                    const auto m = load(g);
                    tile = m.tile;
                    z_overlap = m.z_overlap;
                }
                pipeline::normalize_file(n_ckpt, n_input, n_output, tile, z_overlap, options(g));
            } else {
                if (n_scenario.empty() || n_method.empty())
                    throw ConfigError("normalize needs --scenario and --method (or "
                                      "--checkpoint/--input/--output)");
                if (n_method != "gan" && n_method != "cnn")
                    throw ConfigError("--method must be gan or cnn");
                pipeline::run_normalize(load(g), n_scenario, n_method, options(g));
            }
        } else if (cmd_evaluate->parsed()) {
            pipeline::run_evaluate(load(g), options(g));
        } else if (cmd_report->parsed()) {
            pipeline::run_report(load(g), std::cout);
        }
    } catch (const ExistsError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
