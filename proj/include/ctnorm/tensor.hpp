#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace ctnorm {

// Dense f32 tensor, shape (N, C, D, H, W), W fastest. Lower-rank tensors
// (bias vectors, scalars) use trailing singleton dims.
struct Tensor {
    std::array<int, 5> shape{0, 0, 0, 0, 0};
    std::vector<float> data;

    Tensor() = default;
    Tensor(int n, int c, int d, int h, int w) { resize(n, c, d, h, w); }

    int n() const { return shape[0]; }
    int c() const { return shape[1]; }
    int d() const { return shape[2]; }
    int h() const { return shape[3]; }
    int w() const { return shape[4]; }

    size_t count() const
    {
        return size_t(shape[0]) * shape[1] * shape[2] * shape[3] * shape[4];
    }

    void resize(int n, int c, int d, int h, int w)
    {
        shape = {n, c, d, h, w};
        data.assign(count(), 0.0f);
    }

    void resize_like(const Tensor& o)
    {
        if (shape != o.shape) {
            shape = o.shape;
            data.resize(count());
        }
    }

    void zero() { std::fill(data.begin(), data.end(), 0.0f); }

    size_t index(int n, int c, int d, int h, int w) const
    {
        return (((size_t(n) * shape[1] + c) * shape[2] + d) * shape[3] + h) * size_t(shape[4]) + w;
    }
    float& at(int n, int c, int d, int h, int w) { return data[index(n, c, d, h, w)]; }
    float at(int n, int c, int d, int h, int w) const { return data[index(n, c, d, h, w)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

} // namespace ctnorm
