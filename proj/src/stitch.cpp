#include "ctnorm/stitch.hpp"

#include <algorithm>
#include <cmath>

#include "ctnorm/error.hpp"

namespace ctnorm::gan {

namespace {

std::vector<int> axis_positions(int len, int tile, int overlap)
{
    if (tile > len)
        throw ShapeError("stitch: tile larger than volume axis");
    if (tile == len)
        return {0};
    const int step = tile - overlap;
    if (step < 1)
        throw ShapeError("stitch: overlap leaves no stride");
    std::vector<int> pos;
    for (int p = 0; p + tile < len; p += step)
        pos.push_back(p);
    pos.push_back(len - tile);
    return pos;
}

// Per-axis blend profile: linear ramps over the overlap at interior tile
// edges, flat 1 inside. min() keeps the profile positive when both ramps
// cover the same sample (tiny tiles from randomized plans).
std::vector<double> axis_profile(int tile_len, int ramp, bool lead, bool trail)
{
    std::vector<double> w(size_t(tile_len), 1.0);
    for (int j = 0; j < tile_len; ++j) {
        double v = 1.0;
        if (lead && j < ramp)
            v = std::min(v, double(j + 1) / double(ramp + 1));
        if (trail && j >= tile_len - ramp)
            v = std::min(v, double(tile_len - j) / double(ramp + 1));
        w[size_t(j)] = v;
    }
    return w;
}

} // namespace

StitchPlan make_stitch_plan(int nz, int ny, int nx, std::array<int, 3> tile, int overlap)
{
    if (tile[0] < 1 || tile[1] < 1 || tile[2] < 1)
        throw ShapeError("stitch: tile dims must be positive");
    if (overlap < 0)
        throw ShapeError("stitch: overlap must be >= 0");
    StitchPlan plan;
    plan.tz = tile[0];
    plan.ty = tile[1];
    plan.tx = tile[2];
    plan.overlap = overlap;
    plan.z0 = axis_positions(nz, tile[0], overlap);
    plan.y0 = axis_positions(ny, tile[1], overlap);
    plan.x0 = axis_positions(nx, tile[2], overlap);
    return plan;
}

namespace {

struct WeightField {
    std::vector<double> wz, wy, wx; // flattened per-tile profiles
};

// profiles on the output grid: z doubles (tile depth and ramp length)
WeightField tile_profiles(const StitchPlan& plan, size_t zi, size_t yi, size_t xi, int nz,
                          int ny, int nx)
{
    WeightField f;
    const int last_z = int(plan.z0.size()) - 1, last_y = int(plan.y0.size()) - 1,
              last_x = int(plan.x0.size()) - 1;
    f.wz = axis_profile(2 * plan.tz, 2 * plan.overlap, zi > 0, int(zi) < last_z && plan.tz < nz);
    f.wy = axis_profile(plan.ty, plan.overlap, yi > 0, int(yi) < last_y && plan.ty < ny);
    f.wx = axis_profile(plan.tx, plan.overlap, xi > 0, int(xi) < last_x && plan.tx < nx);
    return f;
}

} // namespace

std::vector<double> stitch_weight_sum(const StitchPlan& plan, int nz, int ny, int nx)
{
    const int onz = 2 * nz;
    std::vector<double> wsum(size_t(onz) * ny * nx, 0.0);
    for (size_t zi = 0; zi < plan.z0.size(); ++zi)
        for (size_t yi = 0; yi < plan.y0.size(); ++yi)
            for (size_t xi = 0; xi < plan.x0.size(); ++xi) {
                const WeightField f = tile_profiles(plan, zi, yi, xi, nz, ny, nx);
                const int oz0 = 2 * plan.z0[zi];
                for (int z = 0; z < 2 * plan.tz; ++z)
                    for (int y = 0; y < plan.ty; ++y)
                        for (int x = 0; x < plan.tx; ++x)
                            wsum[(size_t(oz0 + z) * ny + plan.y0[yi] + y) * nx + plan.x0[xi] + x] +=
                                f.wz[size_t(z)] * f.wy[size_t(y)] * f.wx[size_t(x)];
            }

    // normalized contribution of every tile, re-accumulated
    std::vector<double> unity(size_t(onz) * ny * nx, 0.0);
    for (size_t zi = 0; zi < plan.z0.size(); ++zi)
        for (size_t yi = 0; yi < plan.y0.size(); ++yi)
            for (size_t xi = 0; xi < plan.x0.size(); ++xi) {
                const WeightField f = tile_profiles(plan, zi, yi, xi, nz, ny, nx);
                const int oz0 = 2 * plan.z0[zi];
                for (int z = 0; z < 2 * plan.tz; ++z)
                    for (int y = 0; y < plan.ty; ++y)
                        for (int x = 0; x < plan.tx; ++x) {
                            const size_t i =
                                (size_t(oz0 + z) * ny + plan.y0[yi] + y) * nx + plan.x0[xi] + x;
                            unity[i] += f.wz[size_t(z)] * f.wy[size_t(y)] * f.wx[size_t(x)] / wsum[i];
                        }
            }
    return unity;
}

Volume normalize_volume(Generator& g, const Volume& low_hu, std::array<int, 3> tile,
                        int z_overlap)
{
    const StitchPlan plan = make_stitch_plan(low_hu.nz, low_hu.ny, low_hu.nx, tile, z_overlap);
    const Volume unit = hu_to_unit(low_hu);

    const int onz = 2 * low_hu.nz, ny = low_hu.ny, nx = low_hu.nx;
    std::vector<double> sum(size_t(onz) * ny * nx, 0.0);
    std::vector<double> wsum(size_t(onz) * ny * nx, 0.0);

    Tensor in;
    for (size_t zi = 0; zi < plan.z0.size(); ++zi)
        for (size_t yi = 0; yi < plan.y0.size(); ++yi)
            for (size_t xi = 0; xi < plan.x0.size(); ++xi) {
                in.resize(1, 1, plan.tz, plan.ty, plan.tx);
                for (int z = 0; z < plan.tz; ++z)
                    for (int y = 0; y < plan.ty; ++y)
                        std::copy_n(&unit.voxels[unit.index(plan.z0[zi] + z, plan.y0[yi] + y,
                                                            plan.x0[xi])],
                                    plan.tx, &in.at(0, 0, z, y, 0));
                const Tensor& out = g.forward(in);
                if (out.shape[2] != 2 * plan.tz)
                    throw ShapeError("normalize_volume: generator did not double the z extent");

                const WeightField f = tile_profiles(plan, zi, yi, xi, low_hu.nz, ny, nx);
                const int oz0 = 2 * plan.z0[zi];
                for (int z = 0; z < 2 * plan.tz; ++z)
                    for (int y = 0; y < plan.ty; ++y) {
                        const double wzy = f.wz[size_t(z)] * f.wy[size_t(y)];
                        const float* src = &out.data[out.index(0, 0, z, y, 0)];
                        double* dsum =
                            &sum[(size_t(oz0 + z) * ny + plan.y0[yi] + y) * nx + plan.x0[xi]];
                        double* dw =
                            &wsum[(size_t(oz0 + z) * ny + plan.y0[yi] + y) * nx + plan.x0[xi]];
                        for (int x = 0; x < plan.tx; ++x) {
                            const double w = wzy * f.wx[size_t(x)];
                            dsum[x] += w * src[x];
                            dw[x] += w;
                        }
                    }
            }

    Volume outv(onz, ny, nx, low_hu.sz * 0.5f, low_hu.sy, low_hu.sx);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < int64_t(outv.voxels.size()); ++i) {
        const double v = sum[size_t(i)] / wsum[size_t(i)];
        outv.voxels[size_t(i)] = unit_to_hu(float(std::clamp(v, 0.0, 1.0)));
    }
    return outv;
}

} // namespace ctnorm::gan
