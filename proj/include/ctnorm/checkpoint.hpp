#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ctnorm::nn {

struct NamedTensor {
    std::string name;
    std::vector<uint32_t> dims; // rank = dims.size()
    std::vector<float> data;
};

// "CTWGT1" container: tensor count, then per tensor name / rank / dims /
// f32 payload. Carries weights, Adam moments, spectral u vectors, and
// bookkeeping scalars so training resumes exactly.
void save_checkpoint(const std::vector<NamedTensor>& tensors, const std::filesystem::path& path);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

const NamedTensor* find_tensor(const std::vector<NamedTensor>& ts, const std::string& name);

} // namespace ctnorm::nn
