#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lsda {

// Process-wide switch between the OpenMP kernels and the serial reference
// ones. Kernels are written so that every output element is accumulated in a
// fixed order regardless of scheduling, so the two paths agree bit for bit
// and results do not depend on the thread count.
namespace parallel {

bool enabled();
void set_enabled(bool on);

int max_threads();
void set_threads(int n);  // n <= 0 leaves the OpenMP default

}  // namespace parallel

}  // namespace lsda
