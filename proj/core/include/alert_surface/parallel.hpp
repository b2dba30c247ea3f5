#pragma once

#include <cstddef>
#include <functional>

namespace alert_surface {

/// Worker count: `requested` if nonzero, else hardware concurrency; either
/// way capped by the ALERT_SURFACE_THREADS environment variable when set.
unsigned resolve_workers(unsigned requested = 0);

/// Calls body(i) for i in [0, n) on up to `workers` threads. Work items are
/// claimed dynamically, so bodies must write only to their own slot. The
/// first exception thrown by a body is rethrown after all workers stop.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& body);

}  // namespace alert_surface
