#pragma once

#include <complex>
#include <vector>

namespace ctnorm::detail {

// In-place iterative radix-2 FFT; n must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse);

inline size_t next_pow2(size_t n)
{
    size_t p = 1;
    while (p < n)
        p <<= 1;
    return p;
}

} // namespace ctnorm::detail
