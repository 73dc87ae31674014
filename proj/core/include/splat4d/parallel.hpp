#pragma once

#include <omp.h>

namespace splat4d {

/// Work decomposition is always by fixed-size blocks with results merged in
/// block order, so outputs are bit-identical for any thread count.
/// strict sequential mode just pins the scheduler to one thread.
void set_strict_sequential(bool on);
bool strict_sequential();

/// Threads used for block-parallel loops (1 in strict sequential mode).
int worker_threads();

} // namespace splat4d
