#include "ctnorm/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

#include "ctnorm/error.hpp"

namespace ctnorm::nn {

namespace {

constexpr char kMagic[6] = {'C', 'T', 'W', 'G', 'T', '1'};
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

void save_checkpoint(const std::vector<NamedTensor>& tensors, const std::filesystem::path& path)
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
    const uint32_t count = uint32_t(tensors.size());
    put(&count, sizeof(count));
    for (const auto& t : tensors) {
        if (t.name.size() > 0xffff)
            throw IoError("tensor name too long: " + t.name);
        size_t n = 1;
        for (uint32_t d : t.dims)
            n *= d;
        if (t.dims.empty() || n != t.data.size())
            throw ShapeError("tensor dims do not match payload: " + t.name);
        const uint16_t len = uint16_t(t.name.size());
        put(&len, sizeof(len));
        put(t.name.data(), len);
        const uint8_t rank = uint8_t(t.dims.size());
        put(&rank, sizeof(rank));
        put(t.dims.data(), t.dims.size() * sizeof(uint32_t));
        put(t.data.data(), t.data.size() * sizeof(float));
    }
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path)
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
        throw ParseError("bad magic (not a CTW1 checkpoint): " + path.string());
    uint16_t version = 0;
    get(&version, sizeof(version), "header");
    if (version != kVersion)
        throw ParseError("unsupported CTW1 version: " + path.string());
    uint32_t count = 0;
    get(&count, sizeof(count), "header");

    std::vector<NamedTensor> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        uint16_t len = 0;
        get(&len, sizeof(len), "tensor name");
        NamedTensor t;
        t.name.resize(len);
        get(t.name.data(), len, "tensor name");
        uint8_t rank = 0;
        get(&rank, sizeof(rank), "tensor rank");
        if (rank == 0 || rank > 5)
            throw ParseError("invalid tensor rank in " + path.string());
        t.dims.resize(rank);
        get(t.dims.data(), rank * sizeof(uint32_t), "tensor dims");
        size_t n = 1;
        for (uint32_t d : t.dims) {
            if (d == 0)
                throw ParseError("zero tensor dim in " + path.string());
            n *= d;
        }
        t.data.resize(n);
        get(t.data.data(), n * sizeof(float), "tensor payload");
        out.push_back(std::move(t));
    }
    char extra;
    if (std::fread(&extra, 1, 1, f.get()) == 1)
        throw ParseError("trailing bytes after declared tensors: " + path.string());
    return out;
}

const NamedTensor* find_tensor(const std::vector<NamedTensor>& ts, const std::string& name)
{
    for (const auto& t : ts)
        if (t.name == name)
            return &t;
    return nullptr;
}

} // namespace ctnorm::nn
