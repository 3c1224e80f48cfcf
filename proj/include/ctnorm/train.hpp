#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctnorm/models.hpp"
#include "ctnorm/volume.hpp"

namespace ctnorm::gan {

struct TrainConfig {
    double lr = 1e-5;          // generator and discriminator
    double beta1 = 0.5;
    double beta2 = 0.999;
    double alpha1 = 1.0;       // adversarial weight; 0 gives the CNN baseline
    double alpha2 = 5e-3;      // L1 content weight
    int d_g_ratio = 1;         // G updates per D update
    int batch = 4;
    int iterations = 2000;
    int patch_d = 8;           // input patch (D, H, W); output doubles D
    int patch_h = 32;
    int patch_w = 32;
    uint64_t seed = 0;
    double body_tau = 0.25;    // min fraction of patch voxels above -500 HU
    int val_every = 100;
    int checkpoint_every = 200;

    void validate() const;
};

// Aligned training pair in [0, 1] scale: x from the low-dose/thick volume,
// y from the reference volume at doubled z-origin.
struct PatchPair {
    Tensor x; // (1, 1, D, H, W)
    Tensor y; // (1, 1, 2D, H, W)
    int x_z0 = 0, y0 = 0, x0 = 0;
    int y_z0 = 0;
};

// Rejection-samples n pairs with uniform origins; a candidate is accepted
// when the body fraction of its input patch meets cfg.body_tau. Throws
// SamplingError after 1000*n failed attempts.
std::vector<PatchPair> sample_patch_pairs(const Volume& low_unit, const Volume& ref_unit,
                                          const TrainConfig& cfg, uint64_t seed, int n);

// Hinge losses on raw discriminator scores (means over the batch).
double d_hinge_loss(std::span<const float> real_scores, std::span<const float> fake_scores);
double g_adversarial_loss(std::span<const float> fake_scores, double alpha1);

struct TrainLogRow {
    int64_t iteration = 0;
    double d_loss = 0.0;
    double g_loss_adv = 0.0;
    double g_loss_l1 = 0.0;
    bool has_val = false;
    double val_psnr = 0.0;
    double val_ssim = 0.0;
    double val_perc = 0.0;
};

struct CasePair {
    Volume low_unit; // [0, 1]
    Volume ref_unit; // [0, 1], doubled z
};

struct TrainResult {
    int64_t iterations_run = 0;
    double best_val_perc = 0.0;
    std::filesystem::path last_checkpoint;
    std::filesystem::path best_checkpoint;
};

// Alternating hinge-GAN training (one D step with a fresh power iteration,
// then d_g_ratio G steps). With alpha1 = 0 the discriminator is skipped
// entirely and the loop reduces to the L1 baseline. Fully reproducible from
// (cfg, data, seed); resumes exactly from out_dir/last.ctw when present.
TrainResult train(Generator& g, Discriminator* d, const std::vector<CasePair>& train_cases,
                  const std::vector<CasePair>& val_cases, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir,
                  const std::function<void(const TrainLogRow&)>& on_iteration = nullptr);

} // namespace ctnorm::gan
