#pragma once

#include <string>

#include "ctnorm/volume.hpp"

namespace ctnorm {

// Reconstruction filter window applied on top of the ramp.
// Hann stands in for the scanner's "medium" kernel.
enum class Window { Ramp, Hann, SheppLogan };

Window window_from_name(const std::string& name);
const char* window_name(Window w);

// HU <-> linear attenuation at the simulated effective energy.
constexpr float kMuWater = 0.0195f; // 1/mm

float hu_to_mu(float hu); // clamps negative attenuation to 0
float mu_to_hu(float mu);

// Detectors needed to cover the image diagonal.
int default_detector_count(int image_side);

// Parallel-beam line integrals of a square attenuation image (units 1/mm,
// pixel size in mm). Rays are sampled with bilinear interpolation at
// half-voxel steps and scaled by the step length in mm. Output image:
// h = n_angles, w = n_detectors.
Image2D forward_project(const Image2D& mu, float pixel_mm, int n_angles,
                        float det_spacing, int n_detectors = -1);

// Unfiltered adjoint: smears each detector sample back along its ray,
// scaled by pi / n_angles.
Image2D backproject(const Image2D& sino_slice, int out_side, float pixel_mm,
                    float det_spacing);

// Ramp-filtered back projection of one sinogram slice; output in 1/mm.
Image2D fbp_reconstruct(const Image2D& sino_slice, Window window, int out_side,
                        float pixel_mm, float det_spacing);

namespace ref {
// Serial reference projectors: naive per-ray / per-pixel loops kept for
// testing the parallel kernels and for the benchmark baseline.
Image2D forward_project(const Image2D& mu, float pixel_mm, int n_angles,
                        float det_spacing, int n_detectors = -1);
Image2D backproject(const Image2D& sino_slice, int out_side, float pixel_mm,
                    float det_spacing);
} // namespace ref

} // namespace ctnorm
