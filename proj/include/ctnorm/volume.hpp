#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ctnorm {

// CT value range mapped onto [0, 1]: the full 12-bit scale.
constexpr float kHuMin = -1024.0f;
constexpr float kHuMax = 3071.0f;
constexpr float kHuRange = kHuMax - kHuMin; // 4095

enum class Plane { Axial, Coronal, Sagittal };

inline const char* plane_name(Plane p)
{
    switch (p) {
    case Plane::Axial: return "axial";
    case Plane::Coronal: return "coronal";
    default: return "sagittal";
    }
}

struct Image2D {
    int h = 0;
    int w = 0;
    std::vector<float> pix; // row-major

    Image2D() = default;
    Image2D(int h_, int w_, float fill = 0.0f) : h(h_), w(w_), pix(size_t(h_) * w_, fill) {}

    float& at(int y, int x) { return pix[size_t(y) * w + x]; }
    float at(int y, int x) const { return pix[size_t(y) * w + x]; }
    size_t size() const { return pix.size(); }
};

// 3D scalar field in HU. z-major layout: z slowest, x fastest, so axial
// slices are contiguous.
struct Volume {
    int nz = 0, ny = 0, nx = 0;
    float sz = 1.0f, sy = 1.0f, sx = 1.0f; // spacing in mm
    std::vector<float> voxels;

    Volume() = default;
    Volume(int nz_, int ny_, int nx_, float sz_ = 1.0f, float sy_ = 1.0f, float sx_ = 1.0f);

    size_t count() const { return size_t(nz) * ny * nx; }
    size_t index(int z, int y, int x) const { return (size_t(z) * ny + y) * nx + x; }
    float& at(int z, int y, int x) { return voxels[index(z, y, x)]; }
    float at(int z, int y, int x) const { return voxels[index(z, y, x)]; }

    // throws if dims/spacing/voxel invariants are violated
    void validate() const;
};

struct RoiBox {
    int z = 0, y = 0, x = 0;    // origin, voxel indices
    int dz = 1, dy = 1, dx = 1; // extent, voxel counts
};

// Linear map of HU [-1024, 3071] onto [0, 1]; out-of-range values clamp.
float hu_to_unit(float hu);
float unit_to_hu(float u);
Volume hu_to_unit(const Volume& v);
Volume unit_to_hu(const Volume& v);

// Axial: nz images (ny, nx). Coronal: ny images (nz, nx). Sagittal: nx
// images (nz, ny). Values copied unmodified.
std::vector<Image2D> extract_plane_slices(const Volume& v, Plane p);
Image2D plane_slice(const Volume& v, Plane p, int index);
int plane_slice_count(const Volume& v, Plane p);

// throws BoundsError naming the violating axis
Volume crop_roi(const Volume& v, const RoiBox& r);

// Nearest-slice-center z resampling (thick-slice volumes onto the reference
// grid); in-plane dims unchanged.
Volume resample_z_nearest(const Volume& v, int out_nz);

// "CTV1" container, little-endian, uncompressed
void save_volume(const Volume& v, const std::filesystem::path& path);
Volume load_volume(const std::filesystem::path& path);

} // namespace ctnorm
