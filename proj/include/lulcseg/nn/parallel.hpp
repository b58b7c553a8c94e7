#pragma once

#include <cstdint>
#include <functional>

namespace lulcseg::nn {

// Worker count for the loops below. 0 restores the hardware default.
void set_threads(int n);
int threads();

// Runs fn over contiguous chunks of [begin, end). Each index is handled by
// exactly one worker, so outputs indexed by the loop variable are written
// race-free and results do not depend on the thread count.
void parallel_for(int64_t begin, int64_t end,
                  const std::function<void(int64_t, int64_t)>& fn);

}  // namespace lulcseg::nn
