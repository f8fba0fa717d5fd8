// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace mvsde {

/// Worker count: MVSDE_THREADS if set and positive, otherwise the hardware
/// concurrency (at least 1). Read on every call.
std::size_t worker_count();

/// Runs body(i) for i in [0, n) over contiguous chunks. Each index is
/// visited exactly once; callers must only write index-owned data.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace mvsde
