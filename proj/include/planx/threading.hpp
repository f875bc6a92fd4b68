#pragma once

#include <cstdint>

namespace planx {

// Number of worker threads used by the compute kernels. All kernels are
// written so one thread owns each output element with a fixed inner loop
// order, so results are bit-identical for every thread count.
int max_threads();
void set_max_threads(int n);

}  // namespace planx
