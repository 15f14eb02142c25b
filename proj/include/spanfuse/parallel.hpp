#pragma once

#include <cstddef>
#include <functional>

namespace spanfuse {

/// Resolve a requested worker count. 0 means "auto" (hardware threads).
/// The SPANFUSE_JOBS environment variable, when set to a positive integer,
/// wins over the request.
unsigned resolve_jobs(unsigned requested);

/// Run body(i) for every i in [0, count). body(i) must depend only on i so
/// the outcome is identical for any worker count. The first exception thrown
/// by any worker is rethrown after all workers stop.
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& body);

}  // namespace spanfuse
