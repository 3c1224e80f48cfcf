#include "ctnorm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "ctnorm/error.hpp"
#include "ctnorm/reduce.hpp"

namespace ctnorm::nn {

namespace {

void check_conv_args(const Tensor& x, const Tensor& w, std::span<const float> bias,
                     int stride, int pad)
{
    if (w.shape[1] != x.shape[1])
        throw ShapeError("conv3d: input channels do not match weight");
    if (!bias.empty() && int(bias.size()) != w.shape[0])
        throw ShapeError("conv3d: bias length does not match output channels");
    if (stride < 1 || pad < 0)
        throw ShapeError("conv3d: stride must be >= 1 and pad >= 0");
}

inline int out_dim(int in, int k, int stride, int pad)
{
    return (in + 2 * pad - k) / stride + 1;
}

bool is_k3s1p1(const Tensor& w, int stride, int pad)
{
    return w.shape[2] == 3 && w.shape[3] == 3 && w.shape[4] == 3 && stride == 1 && pad == 1;
}

// ---- padded-input helpers for the 3x3x3 stride-1 kernels ----------------

// (N, C, D, H, W) -> (N, C, D+2, H+2, W+2), zero border
void pad_input(const Tensor& x, std::vector<float>& xp)
{
    const int N = x.shape[0], C = x.shape[1], D = x.shape[2], H = x.shape[3], W = x.shape[4];
    const size_t PHW = size_t(H + 2) * (W + 2);
    const size_t PDHW = size_t(D + 2) * PHW;
    xp.assign(size_t(N) * C * PDHW, 0.0f);
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const float* src = x.data.data() + (size_t(n) * C + c) * D * H * W;
            float* dst = xp.data() + (size_t(n) * C + c) * PDHW;
            for (int d = 0; d < D; ++d)
                for (int h = 0; h < H; ++h)
                    std::memcpy(dst + (size_t(d + 1) * (H + 2) + (h + 1)) * (W + 2) + 1,
                                src + (size_t(d) * H + h) * W, size_t(W) * sizeof(float));
        }
}

template <int W>
void k3_forward_rows(const float* __restrict xp, const float* __restrict w,
                     const float* __restrict bias, float* __restrict y,
                     int N, int Cin, int Cout, int D, int H)
{
    constexpr int Wp = W + 2;
    const size_t PHW = size_t(H + 2) * Wp;
    const size_t PDHW = size_t(D + 2) * PHW;
    const size_t HW = size_t(H) * W;
    const size_t DHW = size_t(D) * HW;
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Cout; ++co) {
            for (int od = 0; od < D; ++od)
                for (int oh = 0; oh < H; ++oh) {
                    float acc[W];
                    const float b = bias ? bias[co] : 0.0f;
                    for (int ow = 0; ow < W; ++ow)
                        acc[ow] = b;
                    for (int ci = 0; ci < Cin; ++ci) {
                        const float* xc = xp + (size_t(n) * Cin + ci) * PDHW + size_t(od) * PHW +
                                          size_t(oh) * Wp;
                        const float* wc = w + (size_t(co) * Cin + ci) * 27;
                        for (int kd = 0; kd < 3; ++kd)
                            for (int kh = 0; kh < 3; ++kh) {
                                const float* xrow = xc + size_t(kd) * PHW + size_t(kh) * Wp;
                                const float* wt = wc + (kd * 3 + kh) * 3;
                                const float w0 = wt[0], w1 = wt[1], w2 = wt[2];
                                for (int ow = 0; ow < W; ++ow)
                                    acc[ow] += w0 * xrow[ow] + w1 * xrow[ow + 1] + w2 * xrow[ow + 2];
                            }
                    }
                    float* yrow = y + (size_t(n) * Cout + co) * DHW + size_t(od) * HW + size_t(oh) * W;
                    for (int ow = 0; ow < W; ++ow)
                        yrow[ow] = acc[ow];
                }
        }
}

void k3_forward_rows_generic(const float* __restrict xp, const float* __restrict w,
                             const float* __restrict bias, float* __restrict y,
                             int N, int Cin, int Cout, int D, int H, int W)
{
    const int Wp = W + 2;
    const size_t PHW = size_t(H + 2) * Wp;
    const size_t PDHW = size_t(D + 2) * PHW;
    const size_t HW = size_t(H) * W;
    const size_t DHW = size_t(D) * HW;
#pragma omp parallel
    {
        std::vector<float> acc(static_cast<size_t>(W));
#pragma omp for collapse(2) schedule(static)
        for (int n = 0; n < N; ++n)
            for (int co = 0; co < Cout; ++co) {
                for (int od = 0; od < D; ++od)
                    for (int oh = 0; oh < H; ++oh) {
                        const float b = bias ? bias[co] : 0.0f;
                        for (int ow = 0; ow < W; ++ow)
                            acc[size_t(ow)] = b;
                        for (int ci = 0; ci < Cin; ++ci) {
                            const float* xc = xp + (size_t(n) * Cin + ci) * PDHW +
                                              size_t(od) * PHW + size_t(oh) * Wp;
                            const float* wc = w + (size_t(co) * Cin + ci) * 27;
                            for (int kd = 0; kd < 3; ++kd)
                                for (int kh = 0; kh < 3; ++kh) {
                                    const float* xrow = xc + size_t(kd) * PHW + size_t(kh) * Wp;
                                    const float* wt = wc + (kd * 3 + kh) * 3;
                                    const float w0 = wt[0], w1 = wt[1], w2 = wt[2];
                                    float* a = acc.data();
                                    for (int ow = 0; ow < W; ++ow)
                                        a[ow] += w0 * xrow[ow] + w1 * xrow[ow + 1] + w2 * xrow[ow + 2];
                                }
                        }
                        float* yrow = y + (size_t(n) * Cout + co) * DHW + size_t(od) * HW +
                                      size_t(oh) * W;
                        for (int ow = 0; ow < W; ++ow)
                            yrow[ow] = acc[size_t(ow)];
                    }
            }
    }
}

void k3_forward(const Tensor& x, const Tensor& w, std::span<const float> bias, Tensor& y)
{
    const int N = x.shape[0], Cin = x.shape[1], D = x.shape[2], H = x.shape[3], W = x.shape[4];
    const int Cout = w.shape[0];
    std::vector<float> xp;
    pad_input(x, xp);
    const float* b = bias.empty() ? nullptr : bias.data();
    switch (W) {
    case 16: k3_forward_rows<16>(xp.data(), w.data.data(), b, y.data.data(), N, Cin, Cout, D, H); break;
    case 32: k3_forward_rows<32>(xp.data(), w.data.data(), b, y.data.data(), N, Cin, Cout, D, H); break;
    case 48: k3_forward_rows<48>(xp.data(), w.data.data(), b, y.data.data(), N, Cin, Cout, D, H); break;
    case 64: k3_forward_rows<64>(xp.data(), w.data.data(), b, y.data.data(), N, Cin, Cout, D, H); break;
    default:
        k3_forward_rows_generic(xp.data(), w.data.data(), b, y.data.data(), N, Cin, Cout, D, H, W);
    }
}

void k3_backward_weight(const Tensor& x, const Tensor& dy, Tensor& dw, std::span<float> dbias)
{
    const int N = x.shape[0], Cin = x.shape[1], D = x.shape[2], H = x.shape[3], W = x.shape[4];
    const int Cout = dy.shape[1];
    std::vector<float> xp;
    pad_input(x, xp);
    const int Wp = W + 2;
    const size_t PHW = size_t(H + 2) * Wp;
    const size_t PDHW = size_t(D + 2) * PHW;
    const size_t HW = size_t(H) * W;
    const size_t DHW = size_t(D) * HW;
    const int Wv = W & ~15; // full 16-lane chunks

    // 4x4 channel blocks: one (kd, kh) sweep serves 16 (co, ci) pairs, so
    // each dy/x plane is read from cache far fewer times. Fixed lane order
    // keeps every pair's sum independent of the thread count.
    constexpr int BC = 4;
    const int n_co_blk = (Cout + BC - 1) / BC;
    const int n_ci_blk = (Cin + BC - 1) / BC;

#pragma omp parallel for collapse(2) schedule(static)
    for (int cob = 0; cob < n_co_blk; ++cob)
        for (int cib = 0; cib < n_ci_blk; ++cib) {
            const int co0 = cob * BC, co1 = std::min(co0 + BC, Cout);
            const int ci0 = cib * BC, ci1 = std::min(ci0 + BC, Cin);
            double tap[BC][BC][27];
            for (int kd = 0; kd < 3; ++kd)
                for (int kh = 0; kh < 3; ++kh) {
                    float lane[BC][BC][3][16];
                    std::memset(lane, 0, sizeof(lane));
                    double rem[BC][BC][3];
                    std::memset(rem, 0, sizeof(rem));
                    for (int n = 0; n < N; ++n)
                        for (int od = 0; od < D; ++od)
                            for (int oh = 0; oh < H; ++oh) {
                                const float* arow[BC];
                                const float* brow[BC];
                                for (int co = co0; co < co1; ++co)
                                    arow[co - co0] = dy.data.data() +
                                                     (size_t(n) * Cout + co) * DHW +
                                                     size_t(od) * HW + size_t(oh) * W;
                                for (int ci = ci0; ci < ci1; ++ci)
                                    brow[ci - ci0] = xp.data() + (size_t(n) * Cin + ci) * PDHW +
                                                     size_t(od + kd) * PHW +
                                                     size_t(oh + kh) * Wp;
                                for (int bo = 0; bo < co1 - co0; ++bo)
                                    for (int bi = 0; bi < ci1 - ci0; ++bi) {
                                        const float* a = arow[bo];
                                        const float* b = brow[bi];
                                        float* l0 = lane[bo][bi][0];
                                        float* l1 = lane[bo][bi][1];
                                        float* l2 = lane[bo][bi][2];
                                        for (int i = 0; i < Wv; i += 16)
                                            for (int j = 0; j < 16; ++j) {
                                                l0[j] += a[i + j] * b[i + j];
                                                l1[j] += a[i + j] * b[i + j + 1];
                                                l2[j] += a[i + j] * b[i + j + 2];
                                            }
                                        for (int i = Wv; i < W; ++i) {
                                            rem[bo][bi][0] += double(a[i]) * b[i];
                                            rem[bo][bi][1] += double(a[i]) * b[i + 1];
                                            rem[bo][bi][2] += double(a[i]) * b[i + 2];
                                        }
                                    }
                            }
                    for (int bo = 0; bo < co1 - co0; ++bo)
                        for (int bi = 0; bi < ci1 - ci0; ++bi)
                            for (int kw = 0; kw < 3; ++kw) {
                                double s = rem[bo][bi][kw];
                                for (int j = 0; j < 16; ++j)
                                    s += lane[bo][bi][kw][j];
                                tap[bo][bi][(kd * 3 + kh) * 3 + kw] = s;
                            }
                }
            for (int co = co0; co < co1; ++co)
                for (int ci = ci0; ci < ci1; ++ci) {
                    float* out = dw.data.data() + (size_t(co) * Cin + ci) * 27;
                    for (int k = 0; k < 27; ++k)
                        out[k] = float(tap[co - co0][ci - ci0][k]);
                }
        }

    if (!dbias.empty()) {
#pragma omp parallel for schedule(static)
        for (int co = 0; co < Cout; ++co) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n) {
                const float* p = dy.data.data() + (size_t(n) * Cout + co) * DHW;
                for (size_t i = 0; i < DHW; ++i)
                    acc += p[i];
            }
            dbias[size_t(co)] = float(acc);
        }
    }
}

// ---- 3x3x3 stride-2 kernels (discriminator stages) -----------------------

bool is_k3s2p1(const Tensor& w, int stride, int pad)
{
    return w.shape[2] == 3 && w.shape[3] == 3 && w.shape[4] == 3 && stride == 2 && pad == 1;
}

void k3s2_forward(const Tensor& x, const Tensor& w, std::span<const float> bias, Tensor& y)
{
    const int N = x.shape[0], Cin = x.shape[1], D = x.shape[2], H = x.shape[3], W = x.shape[4];
    const int Cout = y.shape[1], OD = y.shape[2], OH = y.shape[3], OW = y.shape[4];
    std::vector<float> xp;
    pad_input(x, xp);
    const int Wp = W + 2;
    const size_t PHW = size_t(H + 2) * Wp;
    const size_t PDHW = size_t(D + 2) * PHW;
    const size_t OHW = size_t(OH) * OW;
    const size_t ODHW = size_t(OD) * OHW;
#pragma omp parallel
    {
        std::vector<float> acc(static_cast<size_t>(OW), 0.0f);
#pragma omp for collapse(2) schedule(static)
        for (int n = 0; n < N; ++n)
            for (int co = 0; co < Cout; ++co) {
                for (int od = 0; od < OD; ++od)
                    for (int oh = 0; oh < OH; ++oh) {
                        const float b = bias.empty() ? 0.0f : bias[size_t(co)];
                        for (int ow = 0; ow < OW; ++ow)
                            acc[size_t(ow)] = b;
                        for (int ci = 0; ci < Cin; ++ci) {
                            const float* xc = xp.data() + (size_t(n) * Cin + ci) * PDHW +
                                              size_t(2 * od) * PHW + size_t(2 * oh) * Wp;
                            const float* wc = w.data.data() + (size_t(co) * Cin + ci) * 27;
                            for (int kd = 0; kd < 3; ++kd)
                                for (int kh = 0; kh < 3; ++kh) {
                                    const float* xrow = xc + size_t(kd) * PHW + size_t(kh) * Wp;
                                    const float* wt = wc + (kd * 3 + kh) * 3;
                                    const float w0 = wt[0], w1 = wt[1], w2 = wt[2];
                                    float* a = acc.data();
                                    for (int ow = 0; ow < OW; ++ow)
                                        a[ow] += w0 * xrow[2 * ow] + w1 * xrow[2 * ow + 1] +
                                                 w2 * xrow[2 * ow + 2];
                                }
                        }
                        float* yrow = y.data.data() + (size_t(n) * Cout + co) * ODHW +
                                      size_t(od) * OHW + size_t(oh) * OW;
                        for (int ow = 0; ow < OW; ++ow)
                            yrow[ow] = acc[size_t(ow)];
                    }
            }
    }
}

void k3s2_backward_weight(const Tensor& x, const Tensor& dy, Tensor& dw, std::span<float> dbias)
{
    const int N = x.shape[0], Cin = x.shape[1], H = x.shape[3], W = x.shape[4];
    const int Cout = dy.shape[1], OD = dy.shape[2], OH = dy.shape[3], OW = dy.shape[4];
    std::vector<float> xp;
    pad_input(x, xp);
    const int Wp = W + 2;
    const size_t PHW = size_t(H + 2) * Wp;
    const size_t PDHW = size_t(x.shape[2] + 2) * PHW;
    const size_t OHW = size_t(OH) * OW;
    const size_t ODHW = size_t(OD) * OHW;
    const int Ov = OW & ~15;

#pragma omp parallel for collapse(2) schedule(static)
    for (int co = 0; co < Cout; ++co)
        for (int ci = 0; ci < Cin; ++ci) {
            double tap[27];
            for (int kd = 0; kd < 3; ++kd)
                for (int kh = 0; kh < 3; ++kh) {
                    float l0[16] = {0}, l1[16] = {0}, l2[16] = {0};
                    double r0 = 0.0, r1 = 0.0, r2 = 0.0;
                    for (int n = 0; n < N; ++n)
                        for (int od = 0; od < OD; ++od)
                            for (int oh = 0; oh < OH; ++oh) {
                                const float* a = dy.data.data() + (size_t(n) * Cout + co) * ODHW +
                                                 size_t(od) * OHW + size_t(oh) * OW;
                                const float* b = xp.data() + (size_t(n) * Cin + ci) * PDHW +
                                                 size_t(2 * od + kd) * PHW +
                                                 size_t(2 * oh + kh) * Wp;
                                for (int i = 0; i < Ov; i += 16)
                                    for (int j = 0; j < 16; ++j) {
                                        l0[j] += a[i + j] * b[2 * (i + j)];
                                        l1[j] += a[i + j] * b[2 * (i + j) + 1];
                                        l2[j] += a[i + j] * b[2 * (i + j) + 2];
                                    }
                                for (int i = Ov; i < OW; ++i) {
                                    r0 += double(a[i]) * b[2 * i];
                                    r1 += double(a[i]) * b[2 * i + 1];
                                    r2 += double(a[i]) * b[2 * i + 2];
                                }
                            }
                    for (int j = 0; j < 16; ++j) {
                        r0 += l0[j];
                        r1 += l1[j];
                        r2 += l2[j];
                    }
                    tap[(kd * 3 + kh) * 3 + 0] = r0;
                    tap[(kd * 3 + kh) * 3 + 1] = r1;
                    tap[(kd * 3 + kh) * 3 + 2] = r2;
                }
            float* out = dw.data.data() + (size_t(co) * Cin + ci) * 27;
            for (int k = 0; k < 27; ++k)
                out[k] = float(tap[k]);
        }

    if (!dbias.empty()) {
#pragma omp parallel for schedule(static)
        for (int co = 0; co < Cout; ++co) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n) {
                const float* p = dy.data.data() + (size_t(n) * Cout + co) * ODHW;
                for (size_t i = 0; i < ODHW; ++i)
                    acc += p[i];
            }
            dbias[size_t(co)] = float(acc);
        }
    }
}

// scatter into a per-(n, ci) padded plane; co accumulation order is fixed,
// so results do not depend on the thread count
void k3s2_backward_input(const Tensor& dy, const Tensor& w, Tensor& dx)
{
    const int N = dx.shape[0], Cin = dx.shape[1], D = dx.shape[2], H = dx.shape[3],
              W = dx.shape[4];
    const int Cout = dy.shape[1], OD = dy.shape[2], OH = dy.shape[3], OW = dy.shape[4];
    const int Wp = W + 2;
    const size_t PHW = size_t(H + 2) * Wp;
    const size_t PDHW = size_t(D + 2) * PHW;
    const size_t OHW = size_t(OH) * OW;
    const size_t ODHW = size_t(OD) * OHW;
    const size_t HW = size_t(H) * W;

#pragma omp parallel
    {
        std::vector<float> pad(PDHW, 0.0f);
#pragma omp for collapse(2) schedule(static)
        for (int n = 0; n < N; ++n)
            for (int ci = 0; ci < Cin; ++ci) {
                std::fill(pad.begin(), pad.end(), 0.0f);
                for (int co = 0; co < Cout; ++co) {
                    const float* wc = w.data.data() + (size_t(co) * Cin + ci) * 27;
                    for (int od = 0; od < OD; ++od)
                        for (int oh = 0; oh < OH; ++oh) {
                            const float* dyrow = dy.data.data() +
                                                 (size_t(n) * Cout + co) * ODHW +
                                                 size_t(od) * OHW + size_t(oh) * OW;
                            for (int kd = 0; kd < 3; ++kd)
                                for (int kh = 0; kh < 3; ++kh) {
                                    float* dst = pad.data() + size_t(2 * od + kd) * PHW +
                                                 size_t(2 * oh + kh) * Wp;
                                    const float* wt = wc + (kd * 3 + kh) * 3;
                                    const float w0 = wt[0], w1 = wt[1], w2 = wt[2];
                                    for (int ow = 0; ow < OW; ++ow) {
                                        dst[2 * ow] += w0 * dyrow[ow];
                                        dst[2 * ow + 1] += w1 * dyrow[ow];
                                        dst[2 * ow + 2] += w2 * dyrow[ow];
                                    }
                                }
                        }
                }
                // unpad: interior of the padded plane is the gradient
                float* out = dx.data.data() + (size_t(n) * Cin + ci) * D * HW;
                for (int id = 0; id < D; ++id)
                    for (int ih = 0; ih < H; ++ih)
                        std::memcpy(out + (size_t(id) * H + ih) * W,
                                    pad.data() + size_t(id + 1) * PHW + size_t(ih + 1) * Wp + 1,
                                    size_t(W) * sizeof(float));
            }
    }
}

// ---- generic kernels (any kernel size / stride / pad) -------------------

void generic_forward(const Tensor& x, const Tensor& w, std::span<const float> bias,
                     int stride, int pad, Tensor& y)
{
    const int N = x.shape[0], Cin = x.shape[1], D = x.shape[2], H = x.shape[3], W = x.shape[4];
    const int Cout = w.shape[0], KD = w.shape[2], KH = w.shape[3], KW = w.shape[4];
    const int OD = y.shape[2], OH = y.shape[3], OW = y.shape[4];
#pragma omp parallel for collapse(3) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Cout; ++co)
            for (int od = 0; od < OD; ++od)
                for (int oh = 0; oh < OH; ++oh)
                    for (int ow = 0; ow < OW; ++ow) {
                        float acc = bias.empty() ? 0.0f : bias[size_t(co)];
                        for (int ci = 0; ci < Cin; ++ci)
                            for (int kd = 0; kd < KD; ++kd) {
                                const int id = od * stride + kd - pad;
                                if (id < 0 || id >= D)
                                    continue;
                                for (int kh = 0; kh < KH; ++kh) {
                                    const int ih = oh * stride + kh - pad;
                                    if (ih < 0 || ih >= H)
                                        continue;
                                    const float* xr = &x.data[x.index(n, ci, id, ih, 0)];
                                    const float* wr = &w.data[w.index(co, ci, kd, kh, 0)];
                                    for (int kw = 0; kw < KW; ++kw) {
                                        const int iw = ow * stride + kw - pad;
                                        if (iw < 0 || iw >= W)
                                            continue;
                                        acc += xr[iw] * wr[kw];
                                    }
                                }
                            }
                        y.at(n, co, od, oh, ow) = acc;
                    }
}

void generic_backward_input(const Tensor& dy, const Tensor& w, int stride, int pad, Tensor& dx)
{
    const int N = dx.shape[0], Cin = dx.shape[1], D = dx.shape[2], H = dx.shape[3], W = dx.shape[4];
    const int Cout = w.shape[0], KD = w.shape[2], KH = w.shape[3], KW = w.shape[4];
    const int OD = dy.shape[2], OH = dy.shape[3], OW = dy.shape[4];
#pragma omp parallel for collapse(3) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int ci = 0; ci < Cin; ++ci)
            for (int id = 0; id < D; ++id)
                for (int ih = 0; ih < H; ++ih)
                    for (int iw = 0; iw < W; ++iw) {
                        float acc = 0.0f;
                        for (int co = 0; co < Cout; ++co)
                            for (int kd = 0; kd < KD; ++kd) {
                                const int num_d = id + pad - kd;
                                if (num_d < 0 || num_d % stride != 0)
                                    continue;
                                const int od = num_d / stride;
                                if (od >= OD)
                                    continue;
                                for (int kh = 0; kh < KH; ++kh) {
                                    const int num_h = ih + pad - kh;
                                    if (num_h < 0 || num_h % stride != 0)
                                        continue;
                                    const int oh = num_h / stride;
                                    if (oh >= OH)
                                        continue;
                                    for (int kw = 0; kw < KW; ++kw) {
                                        const int num_w = iw + pad - kw;
                                        if (num_w < 0 || num_w % stride != 0)
                                            continue;
                                        const int ow = num_w / stride;
                                        if (ow >= OW)
                                            continue;
                                        acc += dy.at(n, co, od, oh, ow) *
                                               w.at(co, ci, kd, kh, kw);
                                    }
                                }
                            }
                        dx.at(n, ci, id, ih, iw) = acc;
                    }
}

void generic_backward_weight(const Tensor& x, const Tensor& dy, int stride, int pad,
                             Tensor& dw, std::span<float> dbias)
{
    const int N = x.shape[0], Cin = x.shape[1], D = x.shape[2], H = x.shape[3], W = x.shape[4];
    const int Cout = dy.shape[1], KD = dw.shape[2], KH = dw.shape[3], KW = dw.shape[4];
    const int OD = dy.shape[2], OH = dy.shape[3], OW = dy.shape[4];
#pragma omp parallel for collapse(2) schedule(static)
    for (int co = 0; co < Cout; ++co)
        for (int ci = 0; ci < Cin; ++ci)
            for (int kd = 0; kd < KD; ++kd)
                for (int kh = 0; kh < KH; ++kh)
                    for (int kw = 0; kw < KW; ++kw) {
                        double acc = 0.0;
                        for (int n = 0; n < N; ++n)
                            for (int od = 0; od < OD; ++od) {
                                const int id = od * stride + kd - pad;
                                if (id < 0 || id >= D)
                                    continue;
                                for (int oh = 0; oh < OH; ++oh) {
                                    const int ih = oh * stride + kh - pad;
                                    if (ih < 0 || ih >= H)
                                        continue;
                                    for (int ow = 0; ow < OW; ++ow) {
                                        const int iw = ow * stride + kw - pad;
                                        if (iw < 0 || iw >= W)
                                            continue;
                                        acc += double(dy.at(n, co, od, oh, ow)) *
                                               double(x.at(n, ci, id, ih, iw));
                                    }
                                }
                            }
                        dw.at(co, ci, kd, kh, kw) = float(acc);
                    }

    if (!dbias.empty()) {
        const size_t ODHW = size_t(OD) * OH * OW;
#pragma omp parallel for schedule(static)
        for (int co = 0; co < Cout; ++co) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n) {
                const float* p = dy.data.data() + (size_t(n) * Cout + co) * ODHW;
                for (size_t i = 0; i < ODHW; ++i)
                    acc += p[i];
            }
            dbias[size_t(co)] = float(acc);
        }
    }
}

} // namespace

std::array<int, 5> conv3d_out_shape(const std::array<int, 5>& xs, const Tensor& w,
                                    int stride, int pad)
{
    std::array<int, 5> out;
    out[0] = xs[0];
    out[1] = w.shape[0];
    out[2] = out_dim(xs[2], w.shape[2], stride, pad);
    out[3] = out_dim(xs[3], w.shape[3], stride, pad);
    out[4] = out_dim(xs[4], w.shape[4], stride, pad);
    if (out[2] < 1 || out[3] < 1 || out[4] < 1)
        throw ShapeError("conv3d: output dims would be empty");
    return out;
}

void conv3d_forward(const Tensor& x, const Tensor& w, std::span<const float> bias,
                    int stride, int pad, Tensor& y)
{
    check_conv_args(x, w, bias, stride, pad);
    const auto os = conv3d_out_shape(x.shape, w, stride, pad);
    if (y.shape != os) {
        y.shape = os;
        y.data.resize(y.count());
    }
    if (is_k3s1p1(w, stride, pad))
        k3_forward(x, w, bias, y);
    else if (is_k3s2p1(w, stride, pad))
        k3s2_forward(x, w, bias, y);
    else
        generic_forward(x, w, bias, stride, pad, y);
}

void conv3d_backward_input(const Tensor& dy, const Tensor& w, int stride, int pad,
                           const std::array<int, 5>& x_shape, Tensor& dx)
{
    if (dy.shape[1] != w.shape[0])
        throw ShapeError("conv3d: dy channels do not match weight");
    if (dx.shape != x_shape) {
        dx.shape = x_shape;
        dx.data.resize(dx.count());
    }
    if (is_k3s1p1(w, stride, pad)) {
        // transposed, flipped weights turn the input gradient into another
        // 3x3x3 stride-1 convolution over dy
        const int Cout = w.shape[0], Cin = w.shape[1];
        Tensor wt(Cin, Cout, 3, 3, 3);
        for (int co = 0; co < Cout; ++co)
            for (int ci = 0; ci < Cin; ++ci)
                for (int kd = 0; kd < 3; ++kd)
                    for (int kh = 0; kh < 3; ++kh)
                        for (int kw = 0; kw < 3; ++kw)
                            wt.at(ci, co, kd, kh, kw) = w.at(co, ci, 2 - kd, 2 - kh, 2 - kw);
        k3_forward(dy, wt, {}, dx);
    } else if (is_k3s2p1(w, stride, pad)) {
        k3s2_backward_input(dy, w, dx);
    } else {
        generic_backward_input(dy, w, stride, pad, dx);
    }
}

void conv3d_backward_weight(const Tensor& x, const Tensor& dy, int stride, int pad,
                            Tensor& dw, std::span<float> dbias)
{
    if (!dbias.empty() && int(dbias.size()) != dy.shape[1])
        throw ShapeError("conv3d: dbias length does not match output channels");
    if (is_k3s1p1(dw, stride, pad))
        k3_backward_weight(x, dy, dw, dbias);
    else if (is_k3s2p1(dw, stride, pad))
        k3s2_backward_weight(x, dy, dw, dbias);
    else
        generic_backward_weight(x, dy, stride, pad, dw, dbias);
}

void leaky_relu_forward(const Tensor& x, float slope, Tensor& y)
{
    if (slope < 0.0f || slope >= 1.0f)
        throw DomainError("leaky_relu slope must lie in [0, 1)");
    y.resize_like(x);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < int64_t(x.data.size()); ++i) {
        const float v = x.data[size_t(i)];
        y.data[size_t(i)] = v >= 0.0f ? v : slope * v;
    }
}

void leaky_relu_backward(const Tensor& x, const Tensor& dy, float slope, Tensor& dx)
{
    if (!x.same_shape(dy))
        throw ShapeError("leaky_relu backward: shape mismatch");
    dx.resize_like(x);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < int64_t(x.data.size()); ++i)
        dx.data[size_t(i)] = x.data[size_t(i)] >= 0.0f ? dy.data[size_t(i)]
                                                       : slope * dy.data[size_t(i)];
}

void z_upshuffle_forward(const Tensor& x, Tensor& y)
{
    if (x.shape[1] % 2 != 0)
        throw ShapeError("z_upshuffle: channel count must be even");
    const int N = x.shape[0], C2 = x.shape[1], D = x.shape[2], H = x.shape[3], W = x.shape[4];
    const int C = C2 / 2;
    if (y.shape != std::array<int, 5>{N, C, 2 * D, H, W}) {
        y.shape = {N, C, 2 * D, H, W};
        y.data.resize(y.count());
    }
    const size_t HW = size_t(H) * W;
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int d = 0; d < D; ++d)
                for (int r = 0; r < 2; ++r)
                    std::memcpy(y.data.data() + y.index(n, c, 2 * d + r, 0, 0),
                                x.data.data() + x.index(n, 2 * c + r, d, 0, 0),
                                HW * sizeof(float));
}

void z_upshuffle_backward(const Tensor& dy, Tensor& dx)
{
    const int N = dy.shape[0], C = dy.shape[1], D2 = dy.shape[2], H = dy.shape[3], W = dy.shape[4];
    if (D2 % 2 != 0)
        throw ShapeError("z_upshuffle backward: depth must be even");
    const int D = D2 / 2;
    if (dx.shape != std::array<int, 5>{N, 2 * C, D, H, W}) {
        dx.shape = {N, 2 * C, D, H, W};
        dx.data.resize(dx.count());
    }
    const size_t HW = size_t(H) * W;
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int d = 0; d < D; ++d)
                for (int r = 0; r < 2; ++r)
                    std::memcpy(dx.data.data() + dx.index(n, 2 * c + r, d, 0, 0),
                                dy.data.data() + dy.index(n, c, 2 * d + r, 0, 0),
                                HW * sizeof(float));
}

void global_avg_pool_forward(const Tensor& x, Tensor& y)
{
    const int N = x.shape[0], C = x.shape[1];
    const size_t DHW = size_t(x.shape[2]) * x.shape[3] * x.shape[4];
    if (y.shape != std::array<int, 5>{N, C, 1, 1, 1}) {
        y.shape = {N, C, 1, 1, 1};
        y.data.resize(y.count());
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const float* p = x.data.data() + (size_t(n) * C + c) * DHW;
            double acc = 0.0;
            for (size_t i = 0; i < DHW; ++i)
                acc += p[i];
            y.at(n, c, 0, 0, 0) = float(acc / double(DHW));
        }
}

void global_avg_pool_backward(const Tensor& dy, const std::array<int, 5>& x_shape, Tensor& dx)
{
    const int N = x_shape[0], C = x_shape[1];
    const size_t DHW = size_t(x_shape[2]) * x_shape[3] * x_shape[4];
    if (dx.shape != x_shape) {
        dx.shape = x_shape;
        dx.data.resize(dx.count());
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const float g = dy.at(n, c, 0, 0, 0) / float(DHW);
            float* p = dx.data.data() + (size_t(n) * C + c) * DHW;
            for (size_t i = 0; i < DHW; ++i)
                p[i] = g;
        }
}

void linear_forward(const Tensor& x, const Tensor& w, std::span<const float> bias, Tensor& y)
{
    const int N = x.shape[0], Cin = x.shape[1], Cout = w.shape[0];
    if (w.shape[1] != Cin)
        throw ShapeError("linear: input features do not match weight");
    if (y.shape != std::array<int, 5>{N, Cout, 1, 1, 1}) {
        y.shape = {N, Cout, 1, 1, 1};
        y.data.resize(y.count());
    }
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Cout; ++co) {
            double acc = bias.empty() ? 0.0 : bias[size_t(co)];
            for (int ci = 0; ci < Cin; ++ci)
                acc += double(x.at(n, ci, 0, 0, 0)) * double(w.at(co, ci, 0, 0, 0));
            y.at(n, co, 0, 0, 0) = float(acc);
        }
}

void linear_backward_input(const Tensor& dy, const Tensor& w, Tensor& dx)
{
    const int N = dy.shape[0], Cout = dy.shape[1], Cin = w.shape[1];
    if (dx.shape != std::array<int, 5>{N, Cin, 1, 1, 1}) {
        dx.shape = {N, Cin, 1, 1, 1};
        dx.data.resize(dx.count());
    }
    for (int n = 0; n < N; ++n)
        for (int ci = 0; ci < Cin; ++ci) {
            double acc = 0.0;
            for (int co = 0; co < Cout; ++co)
                acc += double(dy.at(n, co, 0, 0, 0)) * double(w.at(co, ci, 0, 0, 0));
            dx.at(n, ci, 0, 0, 0) = float(acc);
        }
}

void linear_backward_weight(const Tensor& x, const Tensor& dy, Tensor& dw, std::span<float> dbias)
{
    const int N = x.shape[0], Cin = x.shape[1], Cout = dy.shape[1];
    for (int co = 0; co < Cout; ++co) {
        for (int ci = 0; ci < Cin; ++ci) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n)
                acc += double(dy.at(n, co, 0, 0, 0)) * double(x.at(n, ci, 0, 0, 0));
            dw.at(co, ci, 0, 0, 0) = float(acc);
        }
        if (!dbias.empty()) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n)
                acc += double(dy.at(n, co, 0, 0, 0));
            dbias[size_t(co)] = float(acc);
        }
    }
}

double l1_loss(const Tensor& a, const Tensor& b)
{
    if (!a.same_shape(b))
        throw ShapeError("l1_loss: shape mismatch");
    return det_abs_diff_sum(a.data, b.data) / double(a.count());
}

void l1_loss_backward(const Tensor& a, const Tensor& b, float scale, Tensor& da)
{
    if (!a.same_shape(b))
        throw ShapeError("l1_loss backward: shape mismatch");
    da.resize_like(a);
    const float g = scale / float(a.count());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < int64_t(a.data.size()); ++i) {
        const float d = a.data[size_t(i)] - b.data[size_t(i)];
        da.data[size_t(i)] = d > 0.0f ? g : (d < 0.0f ? -g : 0.0f);
    }
}

namespace ref {

void conv3d_forward(const Tensor& x, const Tensor& w, std::span<const float> bias,
                    int stride, int pad, Tensor& y)
{
    check_conv_args(x, w, bias, stride, pad);
    const auto os = conv3d_out_shape(x.shape, w, stride, pad);
    if (y.shape != os) {
        y.shape = os;
        y.data.resize(y.count());
    }
    const int N = x.shape[0], Cin = x.shape[1], D = x.shape[2], H = x.shape[3], W = x.shape[4];
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < os[1]; ++co)
            for (int od = 0; od < os[2]; ++od)
                for (int oh = 0; oh < os[3]; ++oh)
                    for (int ow = 0; ow < os[4]; ++ow) {
                        double acc = bias.empty() ? 0.0 : bias[size_t(co)];
                        for (int ci = 0; ci < Cin; ++ci)
                            for (int kd = 0; kd < w.shape[2]; ++kd)
                                for (int kh = 0; kh < w.shape[3]; ++kh)
                                    for (int kw = 0; kw < w.shape[4]; ++kw) {
                                        const int id = od * stride + kd - pad;
                                        const int ih = oh * stride + kh - pad;
                                        const int iw = ow * stride + kw - pad;
                                        if (id < 0 || id >= D || ih < 0 || ih >= H || iw < 0 ||
                                            iw >= W)
                                            continue;
                                        acc += double(x.at(n, ci, id, ih, iw)) *
                                               double(w.at(co, ci, kd, kh, kw));
                                    }
                        y.at(n, co, od, oh, ow) = float(acc);
                    }
}

void conv3d_backward_input(const Tensor& dy, const Tensor& w, int stride, int pad,
                           const std::array<int, 5>& x_shape, Tensor& dx)
{
    if (dx.shape != x_shape) {
        dx.shape = x_shape;
        dx.data.resize(dx.count());
    }
    dx.zero();
    const int N = dy.shape[0], Cout = dy.shape[1];
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Cout; ++co)
            for (int od = 0; od < dy.shape[2]; ++od)
                for (int oh = 0; oh < dy.shape[3]; ++oh)
                    for (int ow = 0; ow < dy.shape[4]; ++ow) {
                        const double g = dy.at(n, co, od, oh, ow);
                        for (int ci = 0; ci < w.shape[1]; ++ci)
                            for (int kd = 0; kd < w.shape[2]; ++kd)
                                for (int kh = 0; kh < w.shape[3]; ++kh)
                                    for (int kw = 0; kw < w.shape[4]; ++kw) {
                                        const int id = od * stride + kd - pad;
                                        const int ih = oh * stride + kh - pad;
                                        const int iw = ow * stride + kw - pad;
                                        if (id < 0 || id >= x_shape[2] || ih < 0 ||
                                            ih >= x_shape[3] || iw < 0 || iw >= x_shape[4])
                                            continue;
                                        dx.at(n, ci, id, ih, iw) +=
                                            float(g * double(w.at(co, ci, kd, kh, kw)));
                                    }
                    }
}

void conv3d_backward_weight(const Tensor& x, const Tensor& dy, int stride, int pad,
                            Tensor& dw, std::span<float> dbias)
{
    dw.zero();
    std::fill(dbias.begin(), dbias.end(), 0.0f);
    const int N = x.shape[0], Cin = x.shape[1], D = x.shape[2], H = x.shape[3], W = x.shape[4];
    const int Cout = dy.shape[1];
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Cout; ++co)
            for (int od = 0; od < dy.shape[2]; ++od)
                for (int oh = 0; oh < dy.shape[3]; ++oh)
                    for (int ow = 0; ow < dy.shape[4]; ++ow) {
                        const float g = dy.at(n, co, od, oh, ow);
                        if (!dbias.empty())
                            dbias[size_t(co)] += g;
                        for (int ci = 0; ci < Cin; ++ci)
                            for (int kd = 0; kd < dw.shape[2]; ++kd)
                                for (int kh = 0; kh < dw.shape[3]; ++kh)
                                    for (int kw = 0; kw < dw.shape[4]; ++kw) {
                                        const int id = od * stride + kd - pad;
                                        const int ih = oh * stride + kh - pad;
                                        const int iw = ow * stride + kw - pad;
                                        if (id < 0 || id >= D || ih < 0 || ih >= H || iw < 0 ||
                                            iw >= W)
                                            continue;
                                        dw.at(co, ci, kd, kh, kw) += g * x.at(n, ci, id, ih, iw);
                                    }
                    }
}

} // namespace ref

} // namespace ctnorm::nn
