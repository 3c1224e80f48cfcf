#pragma once

namespace ctnorm {

// Worker thread count for the OpenMP kernels. All kernels produce results
// that are independent of the thread count (disjoint writes, fixed-block
// reductions), so this only affects speed; n = 1 gives the fully serial
// execution used by reproducibility tests.
void set_threads(int n);
int thread_count();

} // namespace ctnorm
