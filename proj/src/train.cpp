#include "ctnorm/train.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ctnorm/error.hpp"
#include "ctnorm/metrics.hpp"
#include "ctnorm/ops.hpp"
#include "ctnorm/rng.hpp"

namespace ctnorm::gan {

void TrainConfig::validate() const
{
    if (!(lr > 0.0))
        throw ConfigError("train: lr must be positive");
    if (alpha1 < 0.0 || alpha2 < 0.0)
        throw ConfigError("train: alpha weights must be >= 0");
    if (batch < 1 || iterations < 1 || d_g_ratio < 1)
        throw ConfigError("train: batch, iterations and d_g_ratio must be >= 1");
    if (patch_d < 1 || patch_h < 1 || patch_w < 1)
        throw ConfigError("train: patch dims must be >= 1");
    if (body_tau < 0.0 || body_tau > 1.0)
        throw ConfigError("train: body_tau must lie in [0, 1]");
    if (val_every < 1 || checkpoint_every < 1)
        throw ConfigError("train: cadences must be >= 1");
}

std::vector<PatchPair> sample_patch_pairs(const Volume& low_unit, const Volume& ref_unit,
                                          const TrainConfig& cfg, uint64_t seed, int n)
{
    if (ref_unit.nz != 2 * low_unit.nz || ref_unit.ny != low_unit.ny ||
        ref_unit.nx != low_unit.nx)
        throw ShapeError("sample_patch_pairs: reference dims must be (2*z, y, x) of the input");
    if (cfg.patch_d > low_unit.nz || cfg.patch_h > low_unit.ny || cfg.patch_w > low_unit.nx)
        throw ShapeError("sample_patch_pairs: patch larger than the volume");

    // body test threshold (-500 HU) on the [0, 1] scale
    const float body_thresh = hu_to_unit(-500.0f);
    const int64_t cap = int64_t(1000) * n;

    StreamRng rng(seed, 0x706174636855ull); // "patch"
    std::vector<PatchPair> out;
    out.reserve(size_t(n));
    int64_t attempts = 0;
    while (int(out.size()) < n) {
        if (attempts >= cap)
            throw SamplingError("patch sampling exhausted " + std::to_string(cap) +
                                " attempts (body fraction below threshold everywhere?)");
        ++attempts;
        const int z0 = int(rng.below(uint64_t(low_unit.nz - cfg.patch_d + 1)));
        const int y0 = int(rng.below(uint64_t(low_unit.ny - cfg.patch_h + 1)));
        const int x0 = int(rng.below(uint64_t(low_unit.nx - cfg.patch_w + 1)));

        int64_t body = 0;
        for (int z = 0; z < cfg.patch_d; ++z)
            for (int y = 0; y < cfg.patch_h; ++y) {
                const float* row = &low_unit.voxels[low_unit.index(z0 + z, y0 + y, x0)];
                for (int x = 0; x < cfg.patch_w; ++x)
                    if (row[x] > body_thresh)
                        ++body;
            }
        const double frac = double(body) / (double(cfg.patch_d) * cfg.patch_h * cfg.patch_w);
        if (frac < cfg.body_tau)
            continue;

        PatchPair p;
        p.x_z0 = z0;
        p.y0 = y0;
        p.x0 = x0;
        p.y_z0 = 2 * z0;
        p.x.resize(1, 1, cfg.patch_d, cfg.patch_h, cfg.patch_w);
        for (int z = 0; z < cfg.patch_d; ++z)
            for (int y = 0; y < cfg.patch_h; ++y)
                std::copy_n(&low_unit.voxels[low_unit.index(z0 + z, y0 + y, x0)], cfg.patch_w,
                            &p.x.at(0, 0, z, y, 0));
        p.y.resize(1, 1, 2 * cfg.patch_d, cfg.patch_h, cfg.patch_w);
        for (int z = 0; z < 2 * cfg.patch_d; ++z)
            for (int y = 0; y < cfg.patch_h; ++y)
                std::copy_n(&ref_unit.voxels[ref_unit.index(2 * z0 + z, y0 + y, x0)], cfg.patch_w,
                            &p.y.at(0, 0, z, y, 0));
        out.push_back(std::move(p));
    }
    return out;
}

double d_hinge_loss(std::span<const float> real_scores, std::span<const float> fake_scores)
{
    if (real_scores.empty() || fake_scores.empty())
        throw ShapeError("d_hinge_loss: empty score batch");
    double lr_sum = 0.0;
    for (float s : real_scores)
        lr_sum += std::max(0.0, 1.0 - double(s));
    double lf_sum = 0.0;
    for (float s : fake_scores)
        lf_sum += std::max(0.0, 1.0 + double(s));
    return lr_sum / double(real_scores.size()) + lf_sum / double(fake_scores.size());
}

double g_adversarial_loss(std::span<const float> fake_scores, double alpha1)
{
    if (fake_scores.empty())
        throw ShapeError("g_adversarial_loss: empty score batch");
    double s = 0.0;
    for (float v : fake_scores)
        s += v;
    return -alpha1 * s / double(fake_scores.size());
}

namespace {

void zero_grads(const std::vector<nn::Parameter*>& ps)
{
    for (auto* p : ps)
        p->grad.zero();
}

void gather_batch(const std::vector<PatchPair>& pairs, Tensor& xb, Tensor& yb)
{
    const int B = int(pairs.size());
    const auto& xs = pairs[0].x.shape;
    const auto& ys = pairs[0].y.shape;
    xb.resize(B, 1, xs[2], xs[3], xs[4]);
    yb.resize(B, 1, ys[2], ys[3], ys[4]);
    for (int b = 0; b < B; ++b) {
        std::copy(pairs[size_t(b)].x.data.begin(), pairs[size_t(b)].x.data.end(),
                  xb.data.begin() + xb.index(b, 0, 0, 0, 0));
        std::copy(pairs[size_t(b)].y.data.begin(), pairs[size_t(b)].y.data.end(),
                  yb.data.begin() + yb.index(b, 0, 0, 0, 0));
    }
}

struct OptState {
    int64_t step = 0;
    double best_val = std::numeric_limits<double>::infinity();
};

std::vector<nn::NamedTensor> full_state(Generator& g, Discriminator* d, const OptState& st)
{
    auto ts = g.state("");
    if (d) {
        auto ds = d->state("");
        ts.insert(ts.end(), ds.begin(), ds.end());
    }
    nn::NamedTensor step;
    step.name = "_opt.step";
    step.dims = {1};
    step.data = {float(st.step)};
    ts.push_back(std::move(step));
    nn::NamedTensor bv;
    bv.name = "_opt.best_val";
    bv.dims = {1};
    bv.data = {float(st.best_val)};
    ts.push_back(std::move(bv));
    return ts;
}

// rewrite the log keeping rows at or below start_iter (resume support)
void trim_log(const std::filesystem::path& path, int64_t start_iter)
{
    if (!std::filesystem::exists(path))
        return;
    std::ifstream in(path);
    std::vector<std::string> keep;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            keep.push_back(line);
            header = false;
            continue;
        }
        const int64_t it = std::atoll(line.c_str());
        if (it <= start_iter)
            keep.push_back(line);
    }
    in.close();
    std::ofstream out(path, std::ios::trunc);
    for (const auto& l : keep)
        out << l << '\n';
}

} // namespace

TrainResult train(Generator& g, Discriminator* d, const std::vector<CasePair>& train_cases,
                  const std::vector<CasePair>& val_cases, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir,
                  const std::function<void(const TrainLogRow&)>& on_iteration)
{
    cfg.validate();
    if (train_cases.empty())
        throw ConfigError("train: no training cases");
    if (cfg.alpha1 > 0.0 && !d)
        throw ConfigError("train: adversarial weight set but no discriminator given");

    const bool use_d = cfg.alpha1 > 0.0 && d;
    const bool persist = !out_dir.empty();
    const std::filesystem::path last_path = out_dir / "last.ctw";
    const std::filesystem::path best_path = out_dir / "best.ctw";
    const std::filesystem::path log_path = out_dir / "log.csv";

    nn::AdamConfig adam;
    adam.lr = cfg.lr;
    adam.beta1 = cfg.beta1;
    adam.beta2 = cfg.beta2;

    OptState st;
    if (persist) {
        std::filesystem::create_directories(out_dir);
        if (std::filesystem::exists(last_path)) {
            auto ts = nn::load_checkpoint(last_path);
            g.load_state(ts, "");
            if (use_d)
                d->load_state(ts, "");
            if (const auto* t = nn::find_tensor(ts, "_opt.step"))
                st.step = int64_t(t->data[0]);
            if (const auto* t = nn::find_tensor(ts, "_opt.best_val"))
                st.best_val = t->data[0];
        }
        trim_log(log_path, st.step);
    }

    std::ofstream log;
    if (persist) {
        const bool fresh = !std::filesystem::exists(log_path) ||
                           std::filesystem::file_size(log_path) == 0;
        log.open(log_path, std::ios::app);
        if (fresh)
            log << "iteration,d_loss,g_loss_adv,g_loss_l1,val_psnr,val_ssim,val_perc\n";
    }

    // fixed validation patch set, two per validation case
    std::vector<PatchPair> val_patches;
    for (size_t c = 0; c < val_cases.size(); ++c) {
        auto ps = sample_patch_pairs(val_cases[c].low_unit, val_cases[c].ref_unit, cfg,
                                     hash_combine(cfg.seed, 0x76616cull + c), 2);
        for (auto& p : ps)
            val_patches.push_back(std::move(p));
    }

    auto g_params = g.params();
    std::vector<nn::Parameter*> d_params;
    if (use_d)
        d_params = d->params();

    TrainResult result;
    result.last_checkpoint = last_path;
    result.best_checkpoint = best_path;
    result.best_val_perc = st.best_val;

    Tensor xb, yb, dcat, dscores, dscores2, dgx, l1_grad;

    auto sample_batch = [&](uint64_t seed_i, uint64_t salt) {
        std::vector<PatchPair> pairs;
        pairs.reserve(size_t(cfg.batch));
        StreamRng pick(hash_combine(seed_i, salt));
        for (int b = 0; b < cfg.batch; ++b) {
            const size_t c = pick.below(train_cases.size());
            auto ps = sample_patch_pairs(train_cases[c].low_unit, train_cases[c].ref_unit, cfg,
                                         hash_combine(seed_i, salt * 1000 + uint64_t(b)), 1);
            pairs.push_back(std::move(ps[0]));
        }
        gather_batch(pairs, xb, yb);
    };

    for (int64_t it = st.step + 1; it <= cfg.iterations; ++it) {
        const uint64_t seed_i = hash_combine(cfg.seed, uint64_t(it));
        TrainLogRow row;
        row.iteration = it;

        for (int gstep = 0; gstep < cfg.d_g_ratio; ++gstep) {
            sample_batch(seed_i, uint64_t(gstep) + 1);
            const Tensor& gx = g.forward(xb);
            const int B = cfg.batch;

            if (use_d && gstep == 0) {
                // one discriminator update on [real; fake] per iteration
                zero_grads(d_params);
                dcat.resize(2 * B, 1, gx.shape[2], gx.shape[3], gx.shape[4]);
                std::copy(yb.data.begin(), yb.data.end(), dcat.data.begin());
                std::copy(gx.data.begin(), gx.data.end(), dcat.data.begin() + yb.data.size());
                const Tensor& scores = d->forward(dcat, 1);
                row.d_loss = d_hinge_loss({scores.data.data(), size_t(B)},
                                          {scores.data.data() + B, size_t(B)});
                if (!std::isfinite(row.d_loss))
                    throw TrainError("non-finite discriminator loss at iteration " +
                                     std::to_string(it) + " (last checkpoint: " +
                                     (persist ? last_path.string() : "<none>") + ")");
                dscores.resize(2 * B, 1, 1, 1, 1);
                for (int b = 0; b < B; ++b)
                    dscores.data[size_t(b)] = scores.data[size_t(b)] < 1.0f ? -1.0f / B : 0.0f;
                for (int b = 0; b < B; ++b)
                    dscores.data[size_t(B + b)] =
                        scores.data[size_t(B + b)] > -1.0f ? 1.0f / B : 0.0f;
                d->backward(dscores, false);
                nn::adam_step(d_params, adam, it);
            }

            zero_grads(g_params);
            double g_adv = 0.0;
            row.g_loss_l1 = nn::l1_loss(gx, yb);
            nn::l1_loss_backward(gx, yb, float(cfg.alpha2), l1_grad);
            if (use_d) {
                const Tensor& scores2 = d->forward(gx, 0);
                g_adv = g_adversarial_loss({scores2.data.data(), size_t(B)}, cfg.alpha1);
                dscores2.resize(B, 1, 1, 1, 1);
                std::fill(dscores2.data.begin(), dscores2.data.end(), float(-cfg.alpha1 / B));
                const Tensor& dgx_adv = d->backward(dscores2, true);
                dgx.resize_like(l1_grad);
#pragma omp parallel for schedule(static)
                for (int64_t i = 0; i < int64_t(dgx.data.size()); ++i)
                    dgx.data[size_t(i)] = dgx_adv.data[size_t(i)] + l1_grad.data[size_t(i)];
            } else {
                dgx = l1_grad;
            }
            row.g_loss_adv = g_adv;
            const double g_total = g_adv + cfg.alpha2 * row.g_loss_l1;
            if (!std::isfinite(g_total))
                throw TrainError("non-finite generator loss at iteration " + std::to_string(it) +
                                 " (last checkpoint: " +
                                 (persist ? last_path.string() : "<none>") + ")");
            g.backward(dgx);
            nn::adam_step(g_params, adam, it);
        }

        // periodic validation on the fixed patch set (middle axial slice)
        const bool val_now = !val_patches.empty() &&
                             (it % cfg.val_every == 0 || it == cfg.iterations);
        if (val_now) {
            double sp = 0.0, ss = 0.0, sd = 0.0;
            int n_ok = 0;
            for (const auto& vp : val_patches) {
                const Tensor& gy = g.forward(vp.x);
                const int zc = gy.shape[2] / 2;
                Image2D a(gy.shape[3], gy.shape[4]);
                Image2D r(gy.shape[3], gy.shape[4]);
                std::copy_n(&gy.data[gy.index(0, 0, zc, 0, 0)], a.size(), a.pix.begin());
                std::copy_n(&vp.y.data[vp.y.index(0, 0, zc, 0, 0)], r.size(), r.pix.begin());
                if (a.h < 32 || a.w < 32)
                    continue;
                const double pv = metrics::psnr(a, r);
                sp += std::isinf(pv) ? 100.0 : pv;
                ss += metrics::ssim(a, r);
                sd += metrics::perceptual_distance(a, r);
                ++n_ok;
            }
            if (n_ok > 0) {
                row.has_val = true;
                row.val_psnr = sp / n_ok;
                row.val_ssim = ss / n_ok;
                row.val_perc = sd / n_ok;
                if (persist && row.val_perc < st.best_val) {
                    st.best_val = row.val_perc;
                    OptState snap{it, st.best_val};
                    nn::save_checkpoint(full_state(g, use_d ? d : nullptr, snap), best_path);
                }
            }
        }

        if (persist) {
            char buf[256];
            if (row.has_val)
                std::snprintf(buf, sizeof(buf), "%lld,%.8g,%.8g,%.8g,%.6f,%.6f,%.8g\n",
                              (long long)it, row.d_loss, row.g_loss_adv, row.g_loss_l1,
                              row.val_psnr, row.val_ssim, row.val_perc);
            else
                std::snprintf(buf, sizeof(buf), "%lld,%.8g,%.8g,%.8g,,,\n", (long long)it,
                              row.d_loss, row.g_loss_adv, row.g_loss_l1);
            log << buf;
            log.flush();
        }

        st.step = it;
        if (persist && (it % cfg.checkpoint_every == 0 || it == cfg.iterations))
            nn::save_checkpoint(full_state(g, use_d ? d : nullptr, st), last_path);

        if (on_iteration)
            on_iteration(row);
    }

    result.iterations_run = st.step;
    result.best_val_perc = st.best_val;
    return result;
}

} // namespace ctnorm::gan
