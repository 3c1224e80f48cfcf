#include "ctnorm/sinogram.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

#include "ctnorm/error.hpp"

namespace ctnorm {

Sinogram::Sinogram(int slices, int angles, int detectors, float spacing)
    : n_slices(slices), n_angles(angles), n_detectors(detectors), det_spacing(spacing)
{
    if (slices <= 0 || angles <= 0 || detectors <= 0)
        throw ShapeError("sinogram dims must be positive");
    if (!(spacing > 0.0f))
        throw ShapeError("detector spacing must be positive");
    data.assign(count(), 0.0f);
}

namespace {

constexpr char kMagic[6] = {'C', 'T', 'S', 'I', 'N', '1'};
constexpr uint16_t kVersion = 1;

struct FileCloser {
    void operator()(std::FILE* f) const
    {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

void save_sinogram(const Sinogram& s, const std::filesystem::path& path)
{
    FilePtr f(std::fopen(path.string().c_str(), "wb"));
    if (!f)
        throw IoError("cannot open for writing: " + path.string());
    auto put = [&](const void* p, size_t n) {
        if (std::fwrite(p, 1, n, f.get()) != n)
            throw IoError("short write: " + path.string());
    };
    put(kMagic, sizeof(kMagic));
    put(&kVersion, sizeof(kVersion));
    const uint32_t dims[3] = {uint32_t(s.n_slices), uint32_t(s.n_angles), uint32_t(s.n_detectors)};
    put(dims, sizeof(dims));
    put(&s.det_spacing, sizeof(float));
    put(s.data.data(), s.data.size() * sizeof(float));
}

Sinogram load_sinogram(const std::filesystem::path& path)
{
    FilePtr f(std::fopen(path.string().c_str(), "rb"));
    if (!f)
        throw IoError("cannot open: " + path.string());
    auto get = [&](void* p, size_t n, const char* what) {
        if (std::fread(p, 1, n, f.get()) != n)
            throw ParseError(std::string("truncated ") + what + ": " + path.string());
    };
    char magic[6];
    get(magic, sizeof(magic), "header");
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ParseError("bad magic (not a CTS1 sinogram): " + path.string());
    uint16_t version = 0;
    get(&version, sizeof(version), "header");
    if (version != kVersion)
        throw ParseError("unsupported CTS1 version: " + path.string());
    uint32_t dims[3];
    get(dims, sizeof(dims), "header");
    float spacing = 0.0f;
    get(&spacing, sizeof(spacing), "header");
    if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0 || !(spacing > 0.0f))
        throw ParseError("invalid CTS1 header: " + path.string());
    Sinogram s{int(dims[0]), int(dims[1]), int(dims[2]), spacing};
    const size_t want = s.data.size() * sizeof(float);
    if (std::fread(s.data.data(), 1, want, f.get()) != want)
        throw ParseError("sinogram payload shorter than dims declare: " + path.string());
    char extra;
    if (std::fread(&extra, 1, 1, f.get()) == 1)
        throw ParseError("sinogram payload longer than dims declare: " + path.string());
    return s;
}

} // namespace ctnorm
