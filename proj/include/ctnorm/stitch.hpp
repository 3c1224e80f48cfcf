#pragma once

#include <array>
#include <vector>

#include "ctnorm/models.hpp"
#include "ctnorm/volume.hpp"

namespace ctnorm::gan {

// Tile start positions along every axis: fixed stride tile - overlap, with
// the final tile aligned to the end of the axis.
struct StitchPlan {
    std::vector<int> z0, y0, x0; // input-grid tile origins
    int tz = 0, ty = 0, tx = 0;  // input-grid tile dims
    int overlap = 0;             // input-grid overlap (doubles on output z)
};

StitchPlan make_stitch_plan(int nz, int ny, int nx, std::array<int, 3> tile, int overlap);

// Per-voxel sum of the normalized blend weights on the output grid; the
// partition-of-unity property says every entry is 1.
std::vector<double> stitch_weight_sum(const StitchPlan& plan, int nz, int ny, int nx);

// Tiled whole-volume inference: rescales HU to [0, 1], runs the generator
// over the tile grid, cross-fades overlaps with linear ramps, and converts
// back to HU. Output dims (2*nz, ny, nx).
Volume normalize_volume(Generator& g, const Volume& low_hu, std::array<int, 3> tile,
                        int z_overlap = 4);

} // namespace ctnorm::gan
