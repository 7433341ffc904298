#pragma once

#include <cstddef>
#include <functional>

namespace msqa {

/// Calls fn(i) for i in [0, n) on at most `width` threads. The first exception
/// thrown by any call is rethrown once all workers have stopped.
void parallel_for(std::size_t n, std::size_t width, const std::function<void(std::size_t)>& fn);

}  // namespace msqa
