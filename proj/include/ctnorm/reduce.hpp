#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ctnorm {

// Sum with a fixed 4096-element block decomposition: blocks are summed
// serially, block partials are combined in index order. The result does not
// depend on the thread count, only on the input.
double det_sum(std::span<const float> v);
double det_sum(std::span<const double> v);

double det_mean(std::span<const float> v);
double det_mean(std::span<const double> v);

// sum of |a[i] - b[i]| with the same fixed decomposition
double det_abs_diff_sum(std::span<const float> a, std::span<const float> b);

// sum of v[i]^2
double det_sq_sum(std::span<const float> v);

} // namespace ctnorm
