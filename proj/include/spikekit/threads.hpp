#pragma once

#include <cstddef>

namespace spikekit {

/// Worker cap from SPIKEKIT_THREADS, else the hardware concurrency (at least 1).
std::size_t worker_limit();

} // namespace spikekit
