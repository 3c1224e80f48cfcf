#include "ctnorm/reduce.hpp"

#include <cmath>
#include <cstdint>

namespace ctnorm {

namespace {

constexpr size_t kBlock = 4096;

template <typename T, typename F>
double blocked_sum(size_t n, F&& block_value)
{
    if (n == 0)
        return 0.0;
    const size_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(nblocks);
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < int64_t(nblocks); ++b) {
        const size_t lo = size_t(b) * kBlock;
        const size_t hi = lo + kBlock < n ? lo + kBlock : n;
        double s = 0.0;
        for (size_t i = lo; i < hi; ++i)
            s += block_value(i);
        partial[size_t(b)] = s;
    }
    double total = 0.0;
    for (double p : partial)
        total += p;
    return total;
}

} // namespace

double det_sum(std::span<const float> v)
{
    return blocked_sum<float>(v.size(), [&](size_t i) { return double(v[i]); });
}

double det_sum(std::span<const double> v)
{
    return blocked_sum<double>(v.size(), [&](size_t i) { return v[i]; });
}

double det_mean(std::span<const float> v)
{
    return v.empty() ? 0.0 : det_sum(v) / double(v.size());
}

double det_mean(std::span<const double> v)
{
    return v.empty() ? 0.0 : det_sum(v) / double(v.size());
}

double det_abs_diff_sum(std::span<const float> a, std::span<const float> b)
{
    return blocked_sum<float>(a.size(), [&](size_t i) { return std::abs(double(a[i]) - double(b[i])); });
}

double det_sq_sum(std::span<const float> v)
{
    return blocked_sum<float>(v.size(), [&](size_t i) { return double(v[i]) * double(v[i]); });
}

} // namespace ctnorm
