#include "ctnorm/threading.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ctnorm {

void set_threads(int n)
{
#ifdef _OPENMP
    if (n > 0)
        omp_set_num_threads(n);
#else
    (void)n;
#endif
}

int thread_count()
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace ctnorm
