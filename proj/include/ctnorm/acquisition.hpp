#pragma once

#include <cstdint>
#include <string>

#include "ctnorm/projector.hpp"
#include "ctnorm/sinogram.hpp"
#include "ctnorm/volume.hpp"

namespace ctnorm {

struct AcquisitionConfig {
    double dose = 1.0;          // fraction of full dose, (0, 1]
    double thickness_mm = 1.0;  // reconstructed slice thickness, 1.0 or 2.0
    double n0 = 1e5;            // full-dose photon fluence per ray
    Window window = Window::Hann;
    int n_angles = 120;
    uint64_t seed = 0;

    void validate() const; // throws ConfigError / DomainError
};

// Excess quantum noise for a reduced-dose acquisition: each line integral p
// gains zero-mean Gaussian noise with variance (1/d - 1) * exp(p) / n0
// (Poisson counts propagated through the log transform). Draws are keyed on
// (seed, slice, angle, detector), so the result is independent of execution
// order. d = 1 returns the input unchanged.
Sinogram inject_dose_noise(const Sinogram& s, double dose, double n0, uint64_t seed);

// Slab-average a 0.5mm phantom to the configured slice thickness, forward
// project each slab, inject dose noise, and reconstruct with the windowed
// ramp filter. Output voxels are HU on the phantom's in-plane grid.
Volume simulate_acquisition(const Volume& phantom, const AcquisitionConfig& cfg);

// Intermediate stages, exposed for tests and --keep-sinograms:
Volume slab_average(const Volume& phantom, double thickness_mm);
Sinogram project_volume(const Volume& slabs, int n_angles);

} // namespace ctnorm
