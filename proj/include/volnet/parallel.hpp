#pragma once

#include <functional>

namespace volnet {

// Runs fn(0..n-1) on up to `workers` threads (0 = hardware concurrency).
// Tasks must write only to their own output slots, so results do not depend
// on scheduling. The first exception thrown by a task is rethrown after all
// threads join.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

}  // namespace volnet
