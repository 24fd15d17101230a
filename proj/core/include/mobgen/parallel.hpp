#pragma once

#include <cstddef>
#include <functional>

namespace mobgen {

/// Worker cap for library-internal parallel loops. Defaults to the
/// MOBGEN_THREADS environment variable, else 1.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs fn(i) for i in [0, n) over contiguous static chunks. Callers write
/// results into per-index slots, so output never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Keeps large freed blocks inside the process heap instead of returning them
/// to the kernel, which avoids page-fault churn from the per-call activation
/// buffers of the network. Call once at program start.
void configure_allocator();

}  // namespace mobgen
