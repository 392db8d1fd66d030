#pragma once

#include <functional>

namespace qhardi {

/// Run fn(0..count-1) on a transient worker pool. Results must be written
/// to index-keyed slots by the caller; scheduling cannot affect outputs.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);

/// QHARDI_WORKERS environment variable, else hardware concurrency.
int default_workers();

} // namespace qhardi
