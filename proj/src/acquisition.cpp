#include "ctnorm/acquisition.hpp"

#include <cmath>
#include <cstdint>

#include "ctnorm/error.hpp"
#include "ctnorm/rng.hpp"

namespace ctnorm {

void AcquisitionConfig::validate() const
{
    if (!(dose > 0.0) || dose > 1.0)
        throw DomainError("dose fraction must lie in (0, 1]");
    if (!(n0 > 0.0))
        throw ConfigError("photon fluence n0 must be positive");
    if (n_angles < 8)
        throw ConfigError("n_angles must be >= 8");
    if (thickness_mm != 1.0 && thickness_mm != 2.0)
        throw ConfigError("slice thickness must be 1.0 or 2.0 mm");
}

Sinogram inject_dose_noise(const Sinogram& s, double dose, double n0, uint64_t seed)
{
    if (!(dose > 0.0) || dose > 1.0)
        throw DomainError("dose fraction must lie in (0, 1]");
    if (!(n0 > 0.0))
        throw ConfigError("photon fluence n0 must be positive");
    if (dose == 1.0)
        return s;

    Sinogram out = s;
    const double excess = 1.0 / dose - 1.0;
    const KeyedRng rng(seed, 0x6e6f697365ull); // "noise"
#pragma omp parallel for collapse(2) schedule(static)
    for (int sl = 0; sl < s.n_slices; ++sl)
        for (int a = 0; a < s.n_angles; ++a) {
            for (int d = 0; d < s.n_detectors; ++d) {
                const size_t i = s.index(sl, a, d);
                const double p = s.data[i];
                const double sigma = std::sqrt(excess * std::exp(p) / n0);
                out.data[i] = float(p + sigma * rng.normal_at(i));
            }
        }
    return out;
}

Volume slab_average(const Volume& phantom, double thickness_mm)
{
    if (std::abs(phantom.sz - 0.5f) > 1e-6f)
        throw ShapeError("phantom must be on a 0.5mm z-grid");
    const int slab = int(std::lround(thickness_mm / 0.5));
    if (slab < 1 || phantom.nz % slab != 0)
        throw ShapeError("phantom z-extent not divisible by thickness/0.5");

    Volume out(phantom.nz / slab, phantom.ny, phantom.nx, float(thickness_mm), phantom.sy, phantom.sx);
    const size_t plane = size_t(phantom.ny) * phantom.nx;
#pragma omp parallel for schedule(static)
    for (int z = 0; z < out.nz; ++z) {
        for (size_t i = 0; i < plane; ++i) {
            double acc = 0.0;
            for (int k = 0; k < slab; ++k)
                acc += phantom.voxels[size_t(z * slab + k) * plane + i];
            out.voxels[size_t(z) * plane + i] = float(acc / slab);
        }
    }
    return out;
}

Sinogram project_volume(const Volume& slabs, int n_angles)
{
    if (slabs.nx != slabs.ny || slabs.sx != slabs.sy)
        throw ShapeError("projection requires square in-plane geometry");
    const int nd = default_detector_count(slabs.nx);
    Sinogram sino(slabs.nz, n_angles, nd, slabs.sx);
#pragma omp parallel for schedule(dynamic)
    for (int z = 0; z < slabs.nz; ++z) {
        Image2D mu(slabs.ny, slabs.nx);
        for (int y = 0; y < slabs.ny; ++y)
            for (int x = 0; x < slabs.nx; ++x)
                mu.at(y, x) = hu_to_mu(slabs.at(z, y, x));
        Image2D proj = forward_project(mu, slabs.sx, n_angles, slabs.sx, nd);
        std::copy(proj.pix.begin(), proj.pix.end(), sino.data.begin() + sino.index(z, 0, 0));
    }
    return sino;
}

Volume simulate_acquisition(const Volume& phantom, const AcquisitionConfig& cfg)
{
    cfg.validate();
    Volume slabs = slab_average(phantom, cfg.thickness_mm);
    Sinogram sino = project_volume(slabs, cfg.n_angles);
    sino = inject_dose_noise(sino, cfg.dose, cfg.n0, cfg.seed);

    Volume out(slabs.nz, slabs.ny, slabs.nx, float(cfg.thickness_mm), slabs.sy, slabs.sx);
    const size_t plane = size_t(out.ny) * out.nx;
#pragma omp parallel for schedule(dynamic)
    for (int z = 0; z < out.nz; ++z) {
        Image2D slice(cfg.n_angles, sino.n_detectors);
        std::copy(sino.data.begin() + sino.index(z, 0, 0),
                  sino.data.begin() + sino.index(z, 0, 0) + slice.size(), slice.pix.begin());
        Image2D rec = fbp_reconstruct(slice, cfg.window, out.nx, out.sx, sino.det_spacing);
        for (size_t i = 0; i < plane; ++i)
            out.voxels[size_t(z) * plane + i] = mu_to_hu(rec.pix[i]);
    }
    return out;
}

} // namespace ctnorm
