#pragma once

#include <span>

#include "ctnorm/tensor.hpp"

namespace ctnorm::nn {

// Cross-correlation with zero padding. Weight layout (Cout, Cin, kd, kh, kw),
// bias length Cout. Output spatial dims floor((in + 2p - k)/stride) + 1.
// The 3x3x3 / stride-1 / pad-1 case dispatches to width-specialized kernels;
// everything else runs the generic path.
void conv3d_forward(const Tensor& x, const Tensor& w, std::span<const float> bias,
                    int stride, int pad, Tensor& y);
void conv3d_backward_input(const Tensor& dy, const Tensor& w, int stride, int pad,
                           const std::array<int, 5>& x_shape, Tensor& dx);
void conv3d_backward_weight(const Tensor& x, const Tensor& dy, int stride, int pad,
                            Tensor& dw, std::span<float> dbias);

std::array<int, 5> conv3d_out_shape(const std::array<int, 5>& x_shape, const Tensor& w,
                                    int stride, int pad);

// y = x for x >= 0, slope * x otherwise; slope in [0, 1)
void leaky_relu_forward(const Tensor& x, float slope, Tensor& y);
void leaky_relu_backward(const Tensor& x, const Tensor& dy, float slope, Tensor& dx);

// (N, 2C, D, H, W) -> (N, C, 2D, H, W): channels (2c, 2c+1) interleave into
// depth (2d, 2d+1). Pure rearrangement; backward is the inverse.
void z_upshuffle_forward(const Tensor& x, Tensor& y);
void z_upshuffle_backward(const Tensor& dy, Tensor& dx);

// global average pool over (D, H, W) -> (N, C, 1, 1, 1)
void global_avg_pool_forward(const Tensor& x, Tensor& y);
void global_avg_pool_backward(const Tensor& dy, const std::array<int, 5>& x_shape, Tensor& dx);

// fully connected on (N, C, 1, 1, 1); weight (Cout, Cin, 1, 1, 1)
void linear_forward(const Tensor& x, const Tensor& w, std::span<const float> bias, Tensor& y);
void linear_backward_input(const Tensor& dy, const Tensor& w, Tensor& dx);
void linear_backward_weight(const Tensor& x, const Tensor& dy, Tensor& dw, std::span<float> dbias);

// mean |a - b| over all elements; subgradient 0 at ties
double l1_loss(const Tensor& a, const Tensor& b);
void l1_loss_backward(const Tensor& a, const Tensor& b, float scale, Tensor& da);

namespace ref {
// Serial reference kernels: naive loops, kept as the oracle for the
// parallel implementations and as the benchmark baseline.
void conv3d_forward(const Tensor& x, const Tensor& w, std::span<const float> bias,
                    int stride, int pad, Tensor& y);
void conv3d_backward_input(const Tensor& dy, const Tensor& w, int stride, int pad,
                           const std::array<int, 5>& x_shape, Tensor& dx);
void conv3d_backward_weight(const Tensor& x, const Tensor& dy, int stride, int pad,
                            Tensor& dw, std::span<float> dbias);
} // namespace ref

} // namespace ctnorm::nn
