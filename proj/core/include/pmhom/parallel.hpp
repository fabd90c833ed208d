#pragma once

#include <cstddef>
#include <functional>

namespace pmhom {

/// Runs body(i) for i in [0, count) on up to `workers` threads. Work items must not share
/// mutable state. The first exception thrown by any item is rethrown after all threads join.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

}  // namespace pmhom
