// Kernel benchmark: serial reference implementations vs the OpenMP kernels.
//
//   ctnorm-bench [--threads N] [--reps R]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>

#include "ctnorm/ops.hpp"
#include "ctnorm/projector.hpp"
#include "ctnorm/rng.hpp"
#include "ctnorm/threading.hpp"

using namespace ctnorm;

namespace {

double time_ms(const std::function<void()>& fn, int reps)
{
    fn(); // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r)
        fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void fill_random(std::vector<float>& v, uint64_t seed)
{
    StreamRng rng(seed);
    for (auto& x : v)
        x = float(rng.normal());
}

void row(const char* name, double serial_ms, double parallel_ms, double gmac)
{
    std::printf("%-24s %10.2f ms %10.2f ms %8.2fx %10.2f GMAC/s\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms, gmac / (parallel_ms * 1e-3) * 1e-9);
}

} // namespace

int main(int argc, char** argv)
{
    int threads = thread_count();
    int reps = 5;
    for (int i = 1; i < argc; ++i) {
        if (!std::strcmp(argv[i], "--threads") && i + 1 < argc)
            threads = std::atoi(argv[++i]);
        else if (!std::strcmp(argv[i], "--reps") && i + 1 < argc)
            reps = std::atoi(argv[++i]);
    }
    set_threads(threads);
    std::printf("kernel benchmark, %d thread(s), %d rep(s)\n", threads, reps);
    std::printf("%-24s %13s %13s %9s %13s\n", "kernel", "serial", "parallel", "speedup",
                "throughput");

    // conv3d at the training patch size
    {
        const int N = 4, Cin = 32, Cout = 32, D = 8, H = 32, W = 32;
        Tensor x(N, Cin, D, H, W), w(Cout, Cin, 3, 3, 3), y, yref;
        std::vector<float> bias(Cout, 0.1f);
        fill_random(x.data, 1);
        fill_random(w.data, 2);
        const double macs = double(N) * Cout * D * H * W * Cin * 27;

        const double s = time_ms([&] { nn::ref::conv3d_forward(x, w, bias, 1, 1, yref); }, 1);
        const double p = time_ms([&] { nn::conv3d_forward(x, w, bias, 1, 1, y); }, reps);
        row("conv3d fwd 3x3x3", s, p, macs);

        Tensor dy = y, dx, dw(Cout, Cin, 3, 3, 3);
        std::vector<float> db(Cout, 0.0f);
        fill_random(dy.data, 3);
        const double sbi =
            time_ms([&] { nn::ref::conv3d_backward_input(dy, w, 1, 1, x.shape, dx); }, 1);
        const double pbi =
            time_ms([&] { nn::conv3d_backward_input(dy, w, 1, 1, x.shape, dx); }, reps);
        row("conv3d bwd input", sbi, pbi, macs);

        const double sbw =
            time_ms([&] { nn::ref::conv3d_backward_weight(x, dy, 1, 1, dw, db); }, 1);
        const double pbw = time_ms([&] { nn::conv3d_backward_weight(x, dy, 1, 1, dw, db); }, reps);
        row("conv3d bwd weight", sbw, pbw, macs);
    }

    // projectors at the desk-scale slice geometry
    {
        const int n = 64, n_angles = 120;
        Image2D mu(n, n, 0.01f);
        const double s = time_ms([&] { ref::forward_project(mu, 1.0f, n_angles, 1.0f); }, 1);
        const double p = time_ms([&] { forward_project(mu, 1.0f, n_angles, 1.0f); }, reps);
        row("forward_project 64", s, p, 0.0);

        Image2D sino = forward_project(mu, 1.0f, n_angles, 1.0f);
        const double sb = time_ms([&] { ref::backproject(sino, n, 1.0f, 1.0f); }, 1);
        const double pb = time_ms([&] { backproject(sino, n, 1.0f, 1.0f); }, reps);
        row("backproject 64", sb, pb, 0.0);

        const double pf =
            time_ms([&] { fbp_reconstruct(sino, Window::Hann, n, 1.0f, 1.0f); }, reps);
        std::printf("%-24s %13s %10.2f ms\n", "fbp_reconstruct 64", "-", pf);
    }
    return 0;
}
