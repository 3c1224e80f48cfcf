#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ctnorm/volume.hpp"

namespace ctnorm {

// Position in phantom space: mm offsets (z, y, x) from the volume center.
using Vec3 = std::array<double, 3>;

struct NoduleSpec {
    Vec3 center_mm{0, 0, 0};
    double radius_mm = 3.0;
    double core_hu = 40.0;
    double halo_hu = -350.0;
    bool part_solid = true; // solid core kept under 5mm diameter
};

struct LungSpec {
    Vec3 center_mm{0, 0, 0};
    Vec3 semi_axes_mm{26, 13, 9}; // (z, y, x)
};

struct PhantomSpec {
    // grid: in-plane size/spacing; z is always a 0.5mm grid
    int nx = 64;
    int ny = 64;
    int nz_half = 128;
    double in_plane_mm = 1.0;

    // anatomy
    double body_semi_y_mm = 22.0;
    double body_semi_x_mm = 28.0;
    std::vector<LungSpec> lungs{
        {{0, 0, -12}, {26, 13, 9}},
        {{0, 0, 12}, {26, 13, 9}},
    };

    double body_hu = 40.0;
    double lung_hu = -800.0;
    double air_hu = -1000.0;

    double texture_amp_hu = 60.0;
    double texture_corr_vox = 2.5;

    int vessel_count = 12;
    double vessel_radius_min_mm = 0.3;
    double vessel_radius_max_mm = 0.8;
    double vessel_hu = 40.0;

    std::vector<NoduleSpec> nodules{
        {{-8, 2, -12}, 3.5, 40.0, -350.0, true},
        {{10, -3, 12}, 2.5, 60.0, -350.0, false},
    };

    // nodule-centered ROI boxes emitted on the 1.0mm reference grid
    int roi_dz = 30;
    int roi_hw = 32;

    void validate() const; // throws ConfigError
};

struct PhantomResult {
    Volume vol;                      // HU, z spacing 0.5mm
    std::vector<RoiBox> nodule_rois; // reference-grid (1.0mm) coordinates
};

// 1.0 deep inside a lung, 0.0 outside, cosine ramp across the boundary.
double lung_membership(const PhantomSpec& spec, const Vec3& p_mm);

// Deterministic given (spec, seed).
PhantomResult generate_phantom(const PhantomSpec& spec, uint64_t seed);

// JSON round trip for the manifest / docs schema
std::string phantom_spec_to_json(const PhantomSpec& spec);
PhantomSpec phantom_spec_from_json(const std::string& text);

} // namespace ctnorm
