#pragma once

#include <cstdint>

#include "spikekit/spike_stream.hpp"

namespace spikekit {

/// Stream whose bits are independent Bernoulli(density) draws from a seeded
/// generator. Used by the benchmark and by tests.
SpikeStream random_stream(const StreamGeometry& geometry, std::uint64_t seed, double density = 0.5);

} // namespace spikekit
