#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ctnorm/acquisition.hpp"
#include "ctnorm/models.hpp"
#include "ctnorm/phantom.hpp"
#include "ctnorm/train.hpp"

namespace ctnorm::pipeline {

struct Scenario {
    std::string id;       // "A", "B", "C"
    double dose = 0.25;
    double thickness_mm = 2.0;
};

// One experiment end to end: phantoms, the acquisition scenarios, the case
// split, model/training configuration, and the output directory layout.
struct Manifest {
    std::filesystem::path root; // resolved output directory
    uint64_t seed = 20260808;

    int n_cases = 12;
    std::vector<int> train_cases{0, 1, 2, 3, 4, 5, 6, 7};
    std::vector<int> val_cases{8, 9};
    std::vector<int> test_cases{10, 11};

    PhantomSpec phantom;

    // desk-scale fluence: low enough that reduced-dose noise is clearly
    // visible at 64x64 with 120 views
    double n0 = 1e4;
    int n_angles = 120;
    Window window = Window::Hann;

    std::vector<Scenario> scenarios{
        {"A", 0.10, 2.0}, {"B", 0.25, 2.0}, {"C", 0.50, 2.0}};

    gan::GeneratorConfig generator;
    gan::DiscriminatorConfig discriminator;
    gan::TrainConfig train;

    std::array<int, 3> tile{8, 32, 32};
    int z_overlap = 4;

    void validate() const; // throws ConfigError

    // layout helpers
    std::filesystem::path case_dir(int c) const;
    std::filesystem::path phantom_path(int c) const;
    std::filesystem::path rois_path(int c) const;
    std::filesystem::path scan_path(int c, const std::string& scenario) const; // "ref" or id
    std::filesystem::path model_dir(const std::string& scenario, const std::string& method) const;
    std::filesystem::path normalized_path(const std::string& scenario, const std::string& method,
                                          int c) const;
    std::filesystem::path eval_dir() const;

    const Scenario& scenario(const std::string& id) const; // throws ConfigError

    // per-case / per-stage derived seeds
    uint64_t phantom_seed(int c) const;
    uint64_t scan_seed(int c, const std::string& scenario) const;
    uint64_t train_seed(const std::string& scenario, const std::string& method) const;

    AcquisitionConfig acquisition_config(int c, const Scenario* s) const; // null = reference
};

Manifest load_manifest(const std::filesystem::path& json_path);
void save_manifest(const Manifest& m, const std::filesystem::path& json_path);

// The 12-phantom desk-scale default: 64x64 in-plane, 64 reference slices,
// 8/2/2 split, scenarios A/B/C.
Manifest default_desk_manifest(const std::filesystem::path& root);

} // namespace ctnorm::pipeline
