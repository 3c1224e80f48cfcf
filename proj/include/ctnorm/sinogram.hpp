#pragma once

#include <cmath>
#include <filesystem>
#include <vector>

namespace ctnorm {

// Stack of parallel-beam line-integral projections. Layout: slice-major,
// then angle-major, detector fastest. Angles are implicit: n_angles values
// uniformly spanning [0, pi).
struct Sinogram {
    int n_slices = 0;
    int n_angles = 0;
    int n_detectors = 0;
    float det_spacing = 1.0f; // mm
    std::vector<float> data;

    Sinogram() = default;
    Sinogram(int slices, int angles, int detectors, float spacing);

    double angle(int i) const { return M_PI * double(i) / double(n_angles); }
    size_t count() const { return size_t(n_slices) * n_angles * n_detectors; }
    size_t index(int s, int a, int d) const { return (size_t(s) * n_angles + a) * n_detectors + d; }
    float& at(int s, int a, int d) { return data[index(s, a, d)]; }
    float at(int s, int a, int d) const { return data[index(s, a, d)]; }
};

// "CTS1" container, little-endian
void save_sinogram(const Sinogram& s, const std::filesystem::path& path);
Sinogram load_sinogram(const std::filesystem::path& path);

} // namespace ctnorm
