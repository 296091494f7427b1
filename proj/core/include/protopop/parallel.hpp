#pragma once

#include <cstddef>
#include <functional>

namespace protopop {

// Hardware concurrency, capped by the PROTOPOP_THREADS environment variable.
std::size_t worker_count();

// Runs body(i) for i in [0, n). Callers write results by index so the outcome
// never depends on scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace protopop
