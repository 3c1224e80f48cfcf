#include "ctnorm/volume.hpp"

#include <bit>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "ctnorm/error.hpp"

static_assert(std::endian::native == std::endian::little, "CTV1 I/O assumes a little-endian host");

namespace ctnorm {

Volume::Volume(int nz_, int ny_, int nx_, float sz_, float sy_, float sx_)
    : nz(nz_), ny(ny_), nx(nx_), sz(sz_), sy(sy_), sx(sx_)
{
    if (nz <= 0 || ny <= 0 || nx <= 0)
        throw ShapeError("volume dims must be positive");
    if (!(sz > 0.0f) || !(sy > 0.0f) || !(sx > 0.0f))
        throw ShapeError("volume spacing must be positive");
    voxels.assign(count(), 0.0f);
}

void Volume::validate() const
{
    if (nz <= 0 || ny <= 0 || nx <= 0)
        throw ShapeError("volume dims must be positive");
    if (!(sz > 0.0f) || !(sy > 0.0f) || !(sx > 0.0f))
        throw ShapeError("volume spacing must be positive");
    if (voxels.size() != count())
        throw ShapeError("voxel payload does not match dims");
    for (float v : voxels)
        if (!std::isfinite(v))
            throw DomainError("volume contains non-finite voxels");
}

float hu_to_unit(float hu)
{
    float u = (hu - kHuMin) / kHuRange;
    return u < 0.0f ? 0.0f : (u > 1.0f ? 1.0f : u);
}

float unit_to_hu(float u)
{
    return u * kHuRange + kHuMin;
}

Volume hu_to_unit(const Volume& v)
{
    Volume out = v;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < int64_t(out.voxels.size()); ++i)
        out.voxels[size_t(i)] = hu_to_unit(v.voxels[size_t(i)]);
    return out;
}

Volume unit_to_hu(const Volume& v)
{
    Volume out = v;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < int64_t(out.voxels.size()); ++i)
        out.voxels[size_t(i)] = unit_to_hu(v.voxels[size_t(i)]);
    return out;
}

int plane_slice_count(const Volume& v, Plane p)
{
    switch (p) {
    case Plane::Axial: return v.nz;
    case Plane::Coronal: return v.ny;
    default: return v.nx;
    }
}

Image2D plane_slice(const Volume& v, Plane p, int index)
{
    switch (p) {
    case Plane::Axial: {
        Image2D im(v.ny, v.nx);
        std::memcpy(im.pix.data(), v.voxels.data() + v.index(index, 0, 0), im.size() * sizeof(float));
        return im;
    }
    case Plane::Coronal: {
        Image2D im(v.nz, v.nx);
        for (int z = 0; z < v.nz; ++z)
            std::memcpy(&im.at(z, 0), v.voxels.data() + v.index(z, index, 0), size_t(v.nx) * sizeof(float));
        return im;
    }
    default: {
        Image2D im(v.nz, v.ny);
        for (int z = 0; z < v.nz; ++z)
            for (int y = 0; y < v.ny; ++y)
                im.at(z, y) = v.at(z, y, index);
        return im;
    }
    }
}

std::vector<Image2D> extract_plane_slices(const Volume& v, Plane p)
{
    const int n = plane_slice_count(v, p);
    std::vector<Image2D> out;
    out.resize(size_t(n));
    for (int i = 0; i < n; ++i)
        out[size_t(i)] = plane_slice(v, p, i);
    return out;
}

Volume crop_roi(const Volume& v, const RoiBox& r)
{
    if (r.dz < 1 || r.dy < 1 || r.dx < 1)
        throw BoundsError("roi extent must be >= 1 on every axis");
    if (r.z < 0 || r.z + r.dz > v.nz)
        throw BoundsError("roi exceeds volume bounds on z");
    if (r.y < 0 || r.y + r.dy > v.ny)
        throw BoundsError("roi exceeds volume bounds on y");
    if (r.x < 0 || r.x + r.dx > v.nx)
        throw BoundsError("roi exceeds volume bounds on x");

    Volume out(r.dz, r.dy, r.dx, v.sz, v.sy, v.sx);
    for (int z = 0; z < r.dz; ++z)
        for (int y = 0; y < r.dy; ++y)
            std::memcpy(&out.at(z, y, 0), &v.voxels[v.index(r.z + z, r.y + y, r.x)],
                        size_t(r.dx) * sizeof(float));
    return out;
}

Volume resample_z_nearest(const Volume& v, int out_nz)
{
    if (out_nz < 1)
        throw ShapeError("resample_z_nearest: output z must be positive");
    Volume out(out_nz, v.ny, v.nx, v.sz * float(v.nz) / float(out_nz), v.sy, v.sx);
    const size_t plane = size_t(v.ny) * v.nx;
    for (int i = 0; i < out_nz; ++i) {
        int j = int(std::lround((double(i) + 0.5) * double(v.nz) / double(out_nz) - 0.5));
        j = std::clamp(j, 0, v.nz - 1);
        std::memcpy(out.voxels.data() + size_t(i) * plane, v.voxels.data() + size_t(j) * plane,
                    plane * sizeof(float));
    }
    return out;
}

namespace {

constexpr char kMagic[6] = {'C', 'T', 'V', 'O', 'L', '1'};
constexpr uint16_t kVersion = 1;

struct FileCloser {
    void operator()(std::FILE* f) const
    {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_all(std::FILE* f, const void* p, size_t n, const std::filesystem::path& path)
{
    if (std::fwrite(p, 1, n, f) != n)
        throw IoError("short write: " + path.string());
}

void read_all(std::FILE* f, void* p, size_t n, const char* what, const std::filesystem::path& path)
{
    if (std::fread(p, 1, n, f) != n)
        throw ParseError(std::string("truncated ") + what + ": " + path.string());
}

} // namespace

void save_volume(const Volume& v, const std::filesystem::path& path)
{
    if (v.voxels.size() != v.count())
        throw ShapeError("voxel payload does not match dims");
    FilePtr f(std::fopen(path.string().c_str(), "wb"));
    if (!f)
        throw IoError("cannot open for writing: " + path.string());
    write_all(f.get(), kMagic, sizeof(kMagic), path);
    write_all(f.get(), &kVersion, sizeof(kVersion), path);
    const uint32_t dims[3] = {uint32_t(v.nz), uint32_t(v.ny), uint32_t(v.nx)};
    write_all(f.get(), dims, sizeof(dims), path);
    const float sp[3] = {v.sz, v.sy, v.sx};
    write_all(f.get(), sp, sizeof(sp), path);
    write_all(f.get(), v.voxels.data(), v.voxels.size() * sizeof(float), path);
    if (std::fflush(f.get()) != 0)
        throw IoError("flush failed: " + path.string());
}

Volume load_volume(const std::filesystem::path& path)
{
    FilePtr f(std::fopen(path.string().c_str(), "rb"));
    if (!f)
        throw IoError("cannot open: " + path.string());

    char magic[6];
    read_all(f.get(), magic, sizeof(magic), "header", path);
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ParseError("bad magic (not a CTV1 volume): " + path.string());

    uint16_t version = 0;
    read_all(f.get(), &version, sizeof(version), "header", path);
    if (version != kVersion)
        throw ParseError("unsupported CTV1 version: " + path.string());

    uint32_t dims[3];
    read_all(f.get(), dims, sizeof(dims), "header", path);
    float sp[3];
    read_all(f.get(), sp, sizeof(sp), "header", path);
    if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0)
        throw ParseError("zero dimension in header: " + path.string());

    Volume v;
    v.nz = int(dims[0]);
    v.ny = int(dims[1]);
    v.nx = int(dims[2]);
    v.sz = sp[0];
    v.sy = sp[1];
    v.sx = sp[2];
    v.voxels.resize(v.count());
    const size_t want = v.voxels.size() * sizeof(float);
    const size_t got = std::fread(v.voxels.data(), 1, want, f.get());
    if (got != want)
        throw ParseError("voxel payload shorter than dims declare: " + path.string());
    char extra;
    if (std::fread(&extra, 1, 1, f.get()) == 1)
        throw ParseError("voxel payload longer than dims declare: " + path.string());
    v.validate();
    return v;
}

} // namespace ctnorm
